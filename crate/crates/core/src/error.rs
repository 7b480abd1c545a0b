use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),
    #[error("unknown lattice: {0}")]
    UnknownLattice(String),
    #[error("tolerance unreachable: {0}")]
    ToleranceUnreachable(String),
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
