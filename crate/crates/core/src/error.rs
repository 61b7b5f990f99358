use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("value out of range at (row {row}, col {col}): {value}")]
    ValueOutOfRange { row: usize, col: usize, value: f64 },

    #[error("non-binary value at (row {row}, col {col}) in a matrix declared binary: {value}")]
    NotBinary { row: usize, col: usize, value: f64 },

    #[error("ragged row {row}: expected {expected} values, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("duplicate {what} id {id:?} at position {position}")]
    DuplicateId {
        what: &'static str,
        id: String,
        position: usize,
    },

    #[error("unknown model id {0:?}")]
    UnknownModel(String),

    #[error("unknown example id {0:?}")]
    UnknownExample(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: &'static str,
        value: String,
        allowed: String,
    },

    #[error("missing prediction for medoid example {0}")]
    MissingPrediction(usize),

    #[error("prediction supplied for non-medoid example {0}")]
    UnexpectedPrediction(usize),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("model id sets differ: {0}")]
    IdMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn out_of_range(
        what: &'static str,
        value: impl ToString,
        allowed: impl ToString,
    ) -> Self {
        Error::OutOfRange {
            what,
            value: value.to_string(),
            allowed: allowed.to_string(),
        }
    }
}
