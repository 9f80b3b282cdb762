//! Prescription dynamic programming for finite two-agent teams in which
//! agent 2's memory is split into a part accessible to agent 1 and a private
//! remainder.
//!
//! The crate covers model declaration ([`model`]), delayed-sharing information
//! structures ([`info`]), the two-layer information states ([`belief`]), exact
//! and quantized dynamic programs ([`solver`], [`quantizer`]), decoupled
//! dynamics ([`decoupled`]), a brute-force ground truth ([`oracle`]) and a
//! Monte Carlo simulator with a command-line front end ([`sim`], [`cli`]).

pub mod belief;
pub mod cli;
pub mod control;
pub mod decoupled;
pub mod error;
pub mod generate;
pub mod info;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod quantizer;
pub mod rational;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use model::{Agent, Dist, FiniteSpace, TeamModel, Violation};
pub use rational::Rational;

/// Resource budget, overridable through `NESTED_DP_BUDGET`.
pub fn budget(default: u128) -> u128 {
    std::env::var("NESTED_DP_BUDGET")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(default)
}
