use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("input contains no data rows")]
    Empty,

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset has no labels")]
    NoLabels,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("requested {requested} items but only {available} are available")]
    TooMany { requested: usize, available: usize },

    #[error("information loss is undefined: the summary represents no sample")]
    UndefinedLoss,

    #[error("model file: {0}")]
    Model(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the environment (missing files, unreadable
    /// streams) rather than by invalid input or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
