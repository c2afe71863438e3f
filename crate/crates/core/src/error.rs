use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate doc_id {doc_id:?} (lines {first} and {second})")]
    DuplicateDocId {
        doc_id: String,
        first: usize,
        second: usize,
    },

    #[error("alias {alias:?} is claimed by both {first:?} and {second:?}")]
    AmbiguousAlias {
        alias: String,
        first: String,
        second: String,
    },

    #[error("invalid journal master: {0}")]
    Master(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("singular information matrix (condition number {condition:.3e})")]
    SingularInformation { condition: f64 },

    #[error("zero values in log-normal outcome for: {}", .0.join(", "))]
    ZeroOutcome(Vec<String>),

    #[error("invalid simulation spec: {0}")]
    SimSpec(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
