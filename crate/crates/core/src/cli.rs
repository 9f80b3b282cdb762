//! Command-line front end. Results go to stdout as JSON, diagnostics to
//! stderr. Exit status is 0 on success, 1 on domain errors, 2 on usage
//! errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::decoupled::{solve_decoupled_pbp, sweep_factorizations, DecoupledOptions};
use crate::error::{Error, Result};
use crate::info::InfoStructure;
use crate::model::TeamModel;
use crate::oracle::{
    build_joint, evaluate_strategy, exhaustive_min, random_strategy, ExplicitStrategy, OracleMode, OracleOptions,
};
use crate::problem::ProblemFile;
use crate::quantizer::{build_lattice, error_bound, quantize, tv_distance};
use crate::rational::Rational;
use crate::sim::{rollout, RolloutConfig};
use crate::solver::{
    alpha_bound, extract_control_strategy, solve_exact, solve_pbp_approx, solve_pbp_exact, Psi2,
};

#[derive(Parser, Debug)]
#[command(name = "nested-dp", version, about = "Prescription dynamic programs for two-agent teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model file (team or decoupled).
    model: PathBuf,
    /// Use delayed sharing with this delay instead of the file's `info`.
    #[arg(long)]
    delay: Option<usize>,
}

#[derive(Args, Debug)]
struct DecoupledArgs {
    /// Run the reduced program of a decoupled model.
    #[arg(long)]
    decoupled: bool,
    /// Key agent 1's statistic on its own state.
    #[arg(long = "perfect-obs-1", requires = "decoupled")]
    perfect_obs_1: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Auto,
    Brute,
    Hybrid,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model file and list violations.
    Validate { model: PathBuf },
    /// Exact team-optimal value and policy.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        decoupled: DecoupledArgs,
        /// Include the full policy table.
        #[arg(long)]
        policy: bool,
    },
    /// Agent 1's best response to fixed agent-2 prescriptions.
    Pbp {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        psi2: PathBuf,
        #[command(flatten)]
        decoupled: DecoupledArgs,
        #[arg(long)]
        policy: bool,
    },
    /// Quantized best response at lattice resolution `n`.
    PbpApprox {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        psi2: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Loss bound of the quantized best response against the observed gap.
    Alpha {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        psi2: PathBuf,
        #[arg(long)]
        n: usize,
        /// Lipschitz constant; defaults to the measured finite-difference bound.
        #[arg(long)]
        lipschitz: Option<Rational>,
    },
    /// Exhaustive minimum over all deterministic strategies.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        max_strategies: Option<u128>,
        #[arg(long, value_enum, default_value = "auto")]
        mode: ModeArg,
    },
    /// Monte Carlo evaluation of the optimal or a given explicit strategy.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Explicit strategy file; the solved optimal strategy otherwise.
        #[arg(long)]
        strategy: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
    },
    /// Points of the simplex lattice `Q_n` in dimension `m`.
    Lattice {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
    /// Nearest lattice point to a probability vector.
    Quantize {
        #[arg(long)]
        n: usize,
        /// Coordinates as rationals, e.g. `1/3 2/3`.
        #[arg(required = true, num_args = 1..)]
        point: Vec<Rational>,
    },
    /// Check both belief factorizations at every realized history.
    CheckFactorization {
        #[command(flatten)]
        model: ModelArgs,
        /// Explicit strategy file; a seeded random strategy otherwise.
        #[arg(long)]
        strategy: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok((v, ok)) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("output serializes"));
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

struct Loaded {
    file: ProblemFile,
    model: TeamModel,
    info: InfoStructure,
}

fn load(args: &ModelArgs) -> Result<Loaded> {
    let file = ProblemFile::load(&args.model)?;
    let model = file.team_model()?;
    let info = file.info(&model, args.delay)?;
    Ok(Loaded { file, model, info })
}

fn decoupled_options(d: &DecoupledArgs) -> DecoupledOptions {
    DecoupledOptions { perfect_obs_1: d.perfect_obs_1, ..Default::default() }
}

fn run_decoupled(l: &Loaded, psi2: Option<&Psi2>, d: &DecoupledArgs) -> Result<Value> {
    let dm = l
        .file
        .decoupled()
        .ok_or_else(|| Error::Parse("--decoupled needs a model with \"kind\": \"decoupled\"".into()))?;
    Ok(solve_decoupled_pbp(dm, &l.info, psi2, decoupled_options(d))?.to_json())
}

fn strip_policy(mut v: Value, keep: bool) -> Value {
    if !keep {
        if let Some(obj) = v.as_object_mut() {
            obj.remove("policy");
        }
    }
    v
}

/// The JSON report and whether the command succeeded; only `validate` reports
/// a failure through the JSON itself.
fn run(command: Command) -> Result<(Value, bool)> {
    if let Command::Validate { model } = &command {
        let file = ProblemFile::load(model)?;
        let mut violations = file.validate();
        if violations.is_empty() {
            if let Some(spec) = &file.info {
                if let Err(Error::InvalidInfo(v)) = spec.build(&file.team_model()?) {
                    violations = v;
                }
            }
        }
        let ok = violations.is_empty();
        return Ok((json!({ "violations": violations }), ok));
    }
    run_report(command).map(|v| (v, true))
}

fn run_report(command: Command) -> Result<Value> {
    match command {
        Command::Validate { .. } => unreachable!("handled by run"),
        Command::Solve { model, decoupled, policy } => {
            let l = load(&model)?;
            if decoupled.decoupled {
                return run_decoupled(&l, None, &decoupled);
            }
            let p = solve_exact(&l.model, &l.info)?;
            Ok(strip_policy(p.to_json(&l.model, &l.info), policy))
        }
        Command::Pbp { model, psi2, decoupled, policy } => {
            let l = load(&model)?;
            let psi2 = Psi2::from_json(&read(&psi2)?)?;
            if decoupled.decoupled {
                return run_decoupled(&l, Some(&psi2), &decoupled);
            }
            let p = solve_pbp_exact(&l.model, &l.info, &psi2)?;
            Ok(strip_policy(p.to_json(&l.model, &l.info), policy))
        }
        Command::PbpApprox { model, psi2, n } => {
            let l = load(&model)?;
            let psi2 = Psi2::from_json(&read(&psi2)?)?;
            Ok(solve_pbp_approx(&l.model, &l.info, &psi2, n, false)?.to_json())
        }
        Command::Alpha { model, psi2, n, lipschitz } => {
            let l = load(&model)?;
            let psi2 = Psi2::from_json(&read(&psi2)?)?;
            let exact = solve_pbp_exact(&l.model, &l.info, &psi2)?;
            let approx = solve_pbp_approx(&l.model, &l.info, &psi2, n, true)?;
            let inputs = approx.alpha_inputs(&l.model, lipschitz)?;
            let alpha = alpha_bound(&inputs, l.model.horizon)?;
            let gap = &approx.value - &exact.value;
            Ok(json!({
                "n": n,
                "exact_value": exact.value.to_string(),
                "approx_value": approx.value.to_string(),
                "gap": gap.to_string(),
                "alpha": alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
                "alpha_f64": alpha.iter().map(Rational::to_f64).collect::<Vec<_>>(),
                "within_bound": gap <= alpha[0],
                "inputs": inputs.to_json(),
            }))
        }
        Command::Oracle { model, max_strategies, mode } => {
            let l = load(&model)?;
            let joint = build_joint(&l.model)?;
            let mode = match mode {
                ModeArg::Auto => OracleMode::Auto,
                ModeArg::Brute => OracleMode::Brute,
                ModeArg::Hybrid => OracleMode::Hybrid,
            };
            let options = OracleOptions { mode, max_strategies, ..Default::default() };
            Ok(exhaustive_min(&joint, &l.model, &l.info, options)?.to_json())
        }
        Command::Simulate { model, strategy, seed, episodes } => {
            let l = load(&model)?;
            let config = RolloutConfig { seed, episodes };
            let report = match strategy {
                Some(path) => {
                    let g = ExplicitStrategy::from_json(&l.model, &l.info, &read(&path)?)?;
                    let exact = match build_joint(&l.model) {
                        Ok(joint) => Some(evaluate_strategy(&joint, &l.model, &l.info, &g)?),
                        Err(Error::ResourceLimit(_)) => None,
                        Err(e) => return Err(e),
                    };
                    rollout(&l.model, &g, config, exact)?
                }
                None => {
                    let policy = solve_exact(&l.model, &l.info)?;
                    let controller = extract_control_strategy(&policy, &l.model, &l.info);
                    rollout(&l.model, &controller, config, Some(policy.value.clone()))?
                }
            };
            Ok(report.to_json())
        }
        Command::Lattice { m, n } => Ok(build_lattice(m, n)?.to_json()),
        Command::Quantize { n, point } => {
            let lattice = build_lattice(point.len(), n)?;
            let q = quantize(&lattice, &point)?;
            let nearest = lattice.point(q.index);
            let tv = tv_distance(&point, &nearest)?;
            Ok(json!({
                "m": point.len(),
                "n": n,
                "index": q.index,
                "numerators": q.numerators,
                "point": nearest.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "tv_distance": tv.to_string(),
                "bound": error_bound(point.len(), n).to_string(),
            }))
        }
        Command::CheckFactorization { model, strategy, seed } => {
            let l = load(&model)?;
            let split = l
                .file
                .split()
                .ok_or_else(|| Error::Parse("model has no state split; add a \"split\" field".into()))?;
            let g = match strategy {
                Some(path) => ExplicitStrategy::from_json(&l.model, &l.info, &read(&path)?)?,
                None => random_strategy(&mut ChaCha8Rng::seed_from_u64(seed), &l.model, &l.info),
            };
            Ok(sweep_factorizations(&l.model, &split, &l.info, &g)?.to_json())
        }
    }
}
