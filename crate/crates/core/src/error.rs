use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum MraError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mathematical precondition of a bound or estimator does not hold.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MraError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(MraError::InvalidArgument(msg.into()))
}
