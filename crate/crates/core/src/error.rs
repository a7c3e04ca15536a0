use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by index construction, search, file I/O and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed binary vector/index file. The offset points at the first
    /// byte of the offending field or value.
    #[error("format error in {path} at byte offset {offset}: {detail}")]
    Format {
        path: PathBuf,
        offset: u64,
        detail: String,
    },

    /// Malformed text file (qrels, labels, config).
    #[error("parse error in {path} at line {line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Training data violates a learner precondition.
    #[error("invalid training data: {0}")]
    InvalidTrainingData(String),

    /// A requested effectiveness target cannot be met within the index.
    #[error("target unreachable: {0}")]
    Unreachable(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, offset: u64, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            detail: detail.into(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, detail: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
