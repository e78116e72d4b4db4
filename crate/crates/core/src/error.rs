use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML: {0}")]
    Xml(String),

    #[error("log parse error in {location}: {message}")]
    Log { location: String, message: String },

    #[error("csv row {row}: {message}")]
    CsvRow { row: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("PNML: {0}")]
    Pnml(String),

    #[error("transition {transition} is not enabled")]
    NotEnabled { transition: usize },

    #[error("activity {label:?} has no matching transition in the model")]
    UnmappedActivity { label: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("need at least {needed} traces, got {got}")]
    TooFewTraces { needed: usize, got: usize },

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
