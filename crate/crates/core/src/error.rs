use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value from function {function} at step {step}")]
    NonFinite { step: usize, function: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("sample of length {n} is too short for lag {lag}")]
    TooShort { n: usize, lag: usize },

    #[error("unsupported: {0}")]
    Unsupported(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("asymmetric proposal neighborhood at point {0}")]
    AsymmetricNeighborhood(usize),

    #[error("{failed} of {total} replication results failed (limit 10%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
