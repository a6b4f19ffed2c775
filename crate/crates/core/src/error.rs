use std::path::PathBuf;

use thiserror::Error;

use crate::zeroshot::BackendError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown field `{field}`")]
    UnknownField { line: usize, field: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: label `{label}` has no mapping and no drop rule")]
    UnmappedLabel { row: usize, label: String },

    #[error("invalid template: expected exactly one `{{}}` placeholder, found {0}")]
    Template(usize),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("malformed test set: {0}")]
    MalformedTestSet(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

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

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
