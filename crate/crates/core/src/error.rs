use thiserror::Error;

/// Errors raised by model constructors and solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("drain rate {drain} W exceeds the discharge peak {peak} W")]
    DrainBeyondPeak { drain: f64, peak: f64 },

    #[error("delivered power {power} W exceeds the battery maximum {max} W")]
    InfeasibleDelivery { power: f64, max: f64 },

    #[error("no feasible transmission: the circuit power cannot be supplied")]
    NoFeasibleTransmission,

    #[error("no root in [{lo}, {hi}] after scanning {points} points")]
    NoRootInBracket { lo: f64, hi: f64, points: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverDidNotConverge { iterations: usize, residual: f64 },

    #[error("grid of {requested} evaluations exceeds the budget of {budget}")]
    BudgetExceeded { requested: u64, budget: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
