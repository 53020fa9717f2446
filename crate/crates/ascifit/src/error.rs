use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains a NaN or infinite value")]
    NonFinite,
    #[error("input is empty")]
    EmptyInput,
    #[error("sigma must be strictly positive for this operation")]
    SigmaZero,
    #[error("value {value} is below the folded mean {floor_mean} at the floor")]
    OutOfDomain { value: f64, floor_mean: f64 },
    #[error("root finder did not converge within {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("eta must lie in (0, 1)")]
    BadEta,
    #[error("need at least {needed} distinct points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("exhaustive oracle is limited to n <= {limit}, got {got}")]
    TooLarge { limit: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
