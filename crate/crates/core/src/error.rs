use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline. Variants follow the error classes
/// of the individual operations (dimension, index, config, corpus, ...).
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("corpus error: {0}")]
    Corpus(String),
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("update error: {0}")]
    Update(String),
    #[error("training aborted: {0}")]
    Training(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("version error: expected {expected}, found {found}")]
    Version { expected: u32, found: u32 },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
