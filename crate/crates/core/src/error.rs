use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("degenerate polar decomposition: smallest eigenvalue {0:e} of C^dag C")]
    DegeneratePolar(f64),
    #[error("degenerate gauge: {0}")]
    DegenerateGauge(String),
    #[error("coordinates outside the principal branch: largest singular value {0} >= pi/2")]
    OutOfBranch(f64),
    #[error("resource limit: {0}")]
    Resource(String),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("series is not invertible: leading coefficient is zero")]
    NonInvertibleSeries,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
