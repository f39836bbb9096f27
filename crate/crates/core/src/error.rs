use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building graphs, tables or networks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("architecture parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("unsupported layer composition: {0}")]
    UnsupportedComposition(String),

    #[error("format error in {path} at byte offset {offset}: {message}")]
    Format {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("csv error in {path} at row {row}, column {column}: {message}")]
    Csv {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("no features survive filtering")]
    EmptyFeatures,

    #[error("non-finite value in {layer} at batch {batch}")]
    NonFinite { layer: String, batch: usize },

    #[error("neighbor table hash mismatch: checkpoint expects {expected}, table is {actual}")]
    TableMismatch { expected: String, actual: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::UnsupportedComposition(_) => {
                ErrorKind::Usage
            }
            Error::NonFinite { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Data,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
