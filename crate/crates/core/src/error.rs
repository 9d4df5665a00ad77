use thiserror::Error;

use mctn_autodiff::AutodiffError;

pub type Result<T> = std::result::Result<T, MctnError>;

#[derive(Debug, Error)]
pub enum MctnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),

    #[error("unknown modality '{0}'")]
    UnknownModality(String),

    #[error("{context}: expected dimension {expected}, got {actual}")]
    Dimension { context: String, expected: usize, actual: usize },

    #[error("empty sequence")]
    EmptySequence,

    #[error("sequence length {len} exceeds padded length {max_len}")]
    TooLong { len: usize, max_len: usize },

    #[error("teacher sequence has length {actual}, expected {expected}")]
    TeacherLength { expected: usize, actual: usize },

    #[error("manifest schema: {0}")]
    Schema(String),

    #[error("sample '{sample}': {reason}")]
    Sample { sample: String, reason: String },

    #[error("missing file {path}: {source}")]
    MissingFile { path: String, source: std::io::Error },

    #[error("invalid intervals: {0}")]
    Intervals(String),

    #[error("invalid variant: {0}")]
    Variant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("loss breakdown is missing component {0}")]
    MissingComponent(&'static str),

    #[error("split '{0}' is empty")]
    EmptySplit(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("metric: {0}")]
    Metric(String),

    #[error("beam search: {0}")]
    Beam(String),

    #[error("topology mismatch: {0}")]
    Topology(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
