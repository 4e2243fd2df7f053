use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column `{column}`: {message}")]
    Parse {
        line: usize,
        column: String,
        message: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{what} = {value} is out of range ({allowed})")]
    OutOfRange {
        what: &'static str,
        value: String,
        allowed: String,
    },

    #[error("cost matrix entry ({row}, {col}) is not finite")]
    NonFiniteCost { row: usize, col: usize },

    #[error(
        "no built-in threshold for d = {d}, alpha = {alpha}; \
         the table covers d <= 6 and alpha in {{0.05, 0.10}}, run a fresh calibration instead"
    )]
    ThresholdUnavailable { d: usize, alpha: f64 },

    #[error("unknown {what} `{value}`")]
    Unknown { what: &'static str, value: String },

    #[error("{0}")]
    Unsupported(String),

    #[error("replicate {replicate} of cell (r = {r}, rho = {rho}) failed: {source}")]
    Replicate {
        r: f64,
        rho: f64,
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::InvalidData(_) => "invalid-data",
            Error::InvalidSchema(_) => "invalid-schema",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::OutOfRange { .. } => "out-of-range",
            Error::NonFiniteCost { .. } => "non-finite-cost",
            Error::ThresholdUnavailable { .. } => "threshold-unavailable",
            Error::Unknown { .. } => "unknown-name",
            Error::Unsupported(_) => "unsupported",
            Error::Replicate { .. } => "replicate-failed",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn out_of_range(
    what: &'static str,
    value: impl ToString,
    allowed: impl Into<String>,
) -> Error {
    Error::OutOfRange {
        what,
        value: value.to_string(),
        allowed: allowed.into(),
    }
}
