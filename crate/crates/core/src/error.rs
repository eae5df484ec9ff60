use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("behavior is signalling; the operation needs a no-signalling input")]
    SignallingInput,
    #[error("correlators do not describe a valid behavior: {0}")]
    InvalidCorrelators(String),
    #[error("mixing weight {0} is outside [0, 1]")]
    WeightOutOfRange(f64),
    #[error("invalid party id {0}")]
    InvalidParty(u8),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical breakdown in double-precision LP: {0}")]
    NumericalBreakdown(String),
    #[error("family {0} is not in the catalog")]
    CatalogMissing(u32),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
