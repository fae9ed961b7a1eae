use thiserror::Error;

use crate::equilibrium::EquilibriumResult;
use crate::model::Subset;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the library.
///
/// Agent indices carried in error payloads are 0-based; messages render
/// agents and subsets 1-based.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too many agents: {n} (exhaustive outcome tables support at most {max})")]
    TooManyAgents { n: usize, max: usize },

    #[error("budget constraint violated: shares at outcome {} sum to {total} > 1", Subset(*subset_bits))]
    BudgetExceeded { subset_bits: u32, total: f64 },

    #[error("degenerate profile: p_{} = {value} is on the boundary", agent + 1)]
    DegenerateProfile { agent: usize, value: f64 },

    #[error(
        "small-budget admissibility violated for agent {}: c'(1) = {derivative_at_one} <= marginal gain {gain}",
        agent + 1
    )]
    NotAdmissible {
        agent: usize,
        derivative_at_one: f64,
        gain: f64,
    },

    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence {
        iterations: usize,
        best_residual: f64,
        partial: Vec<EquilibriumResult>,
    },

    #[error("profile is not an equilibrium: residual {residual:e} exceeds tolerance {tolerance:e}")]
    NotAnEquilibrium { residual: f64, tolerance: f64 },

    #[error("tight sets are not totally ordered by inclusion: {} and {} are incomparable", Subset(*first), Subset(*second))]
    InconsistentTightSets { first: u32, second: u32 },

    #[error(
        "profile is not implementable by a Luce contract: condition fails at I = {} (lhs {lhs} > rhs {rhs})",
        Subset(*subset_bits)
    )]
    NotLuceImplementable { subset_bits: u32, lhs: f64, rhs: f64 },

    #[error("distinct Luce contract reproduces the target profile (separation {separation:e})")]
    UniquenessViolation { separation: f64 },

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
