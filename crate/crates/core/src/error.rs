use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("invalid interval: lo {lo} > hi {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("variable {0} is not declared in the formula")]
    UndeclaredVariable(usize),

    #[error("domain of variable {0} must be bounded")]
    UnboundedDomain(usize),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{0}")]
    Unsupported(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
