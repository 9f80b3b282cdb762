//! Dynamic programs over information states.
//!
//! * [`solve_exact`]: team-optimal prescriptions over reachable shared beliefs.
//! * [`solve_pbp_exact`]: agent 1's best response to a fixed agent-2
//!   prescription family, over `(agent-1 belief, accessible data)`.
//! * [`solve_pbp_approx`]: the same recursion with every belief snapped to the
//!   simplex lattice, plus the exact performance of the resulting strategy.
//! * [`alpha_bound`]: the worst-case loss bound of the quantized recursion.

mod alpha;
mod approx;
mod exact;
mod pbp;
mod strategy;

pub use alpha::{alpha_bound, AlphaBoundInputs};
pub use approx::{solve_pbp_approx, ApproxPolicy};
pub use exact::{solve_exact, solve_exact_with, PolicyEntry, Root, ValuePolicy};
pub use pbp::{solve_pbp_exact, PbpEntry, PbpPolicy, Psi2};
pub use strategy::{extract_control_strategy, ApproxController, DpController, PbpController};


const DEFAULT_NODE_BUDGET: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Maximum number of prescription pairs examined at one node.
    pub budget: u128,
}

impl SolveOptions {
    pub fn from_env() -> Self {
        SolveOptions {
            budget: crate::budget(DEFAULT_NODE_BUDGET),
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::from_env()
    }
}

/// The `len` base-`radix` digits of `index`, most significant first.
pub fn digits(mut index: u128, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % radix as u128) as usize;
        index /= radix as u128;
    }
    out
}
