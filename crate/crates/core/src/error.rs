use thiserror::Error;

/// Errors raised by the optimizers, mechanisms and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("privacy budget exceeded: {requested} requested with {used} of {budget} already used")]
    BudgetExceeded { requested: u64, used: u64, budget: u64 },

    #[error("quadrature did not converge: estimate {estimate:e} with error bound {error_bound:e}")]
    Convergence { estimate: f64, error_bound: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
