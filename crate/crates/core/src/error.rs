use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// Malformed binary or text file. `offset` is the byte offset (or line
    /// number for text formats) where decoding failed.
    #[error("format error at offset {offset}: {reason}")]
    Format { offset: usize, reason: String },

    /// Any of the above while reading or writing `path`.
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: Box<Error> },

    #[error("invalid gaussian {index}: {reason}")]
    InvalidGaussian { index: usize, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn format(offset: usize, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn gaussian(index: usize, reason: impl Into<String>) -> Self {
        Error::InvalidGaussian {
            index,
            reason: reason.into(),
        }
    }

    /// The error with the file context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::File { source, .. } => source.root(),
            e => e,
        }
    }

    pub(crate) fn shape(reason: impl Into<String>) -> Self {
        Error::Shape(reason.into())
    }
}
