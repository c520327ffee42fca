use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file is empty")]
    EmptyFile,

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row}, column `{column}`: value `{value}` is not finite")]
    NonFinite { row: usize, column: String, value: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("threshold {threshold} on attribute {attr} is outside ({lower}, {upper})")]
    ThresholdOutside {
        attr: usize,
        threshold: f64,
        lower: f64,
        upper: f64,
    },

    #[error("no rule covers the point")]
    Uncovered,

    #[error("malformed model: {0}")]
    Malformed(String),

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("inconsistent counts: {0}")]
    InconsistentCounts(String),

    #[error("objective denominator is zero")]
    ZeroDenominator,

    #[error("pop from an empty heap")]
    EmptyHeap,

    #[error("invalid configuration: {0}")]
    Config(String),
}
