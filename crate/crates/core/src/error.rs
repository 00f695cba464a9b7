use thiserror::Error;

/// Errors surfaced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lag: {0}")]
    InvalidLag(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("column not found: variable {var} at lag {lag}")]
    ColumnNotFound { var: usize, lag: usize },

    #[error("insufficient samples: {have} samples for k={k}")]
    InsufficientSamples { have: usize, k: usize },

    #[error("insufficient history: process {process} needs depth {need}, got {have}")]
    InsufficientHistory {
        process: u8,
        need: usize,
        have: usize,
    },

    #[error("unstable process: no stable series after {0} attempts")]
    UnstableProcess(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("model incompatibility: {0}")]
    Incompatibility(String),

    #[error("deserialization failed at byte offset {offset}: {reason}")]
    Deserialize { offset: u64, reason: String },

    #[error("inconsistent evaluation input: {0}")]
    Inconsistent(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
