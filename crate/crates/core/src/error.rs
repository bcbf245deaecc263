use thiserror::Error;

/// Errors produced by the analysis toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("duplicate event_id {0:?}")]
    DuplicateEvent(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("events are not sorted by timestamp")]
    Unsorted,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("constant vector: correlation is undefined")]
    ConstantVector,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("value {0} is outside the bin coverage")]
    OutsideBins(f64),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
