use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix exponential argument too large (norm {norm:.3e})")]
    ExpOverflow { norm: f64 },

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("monodromy has {count} unit eigenvalues; the limit cycle is not unique")]
    DegenerateFixedSpace { count: usize },

    #[error("power iteration did not converge within {iterations} periods")]
    NonConvergent { iterations: usize },

    #[error("initial relative entropy is infinite")]
    InfiniteEntropy,

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
