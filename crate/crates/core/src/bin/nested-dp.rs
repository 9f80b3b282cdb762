fn main() {
    std::process::exit(nested_dp::cli::cli_main(std::env::args().collect()));
}
