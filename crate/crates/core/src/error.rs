use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry {height}x{width}: {reason}")]
    InvalidGeometry {
        height: usize,
        width: usize,
        reason: &'static str,
    },

    #[error("geometry mismatch: expected {expected:?}, found {found:?}")]
    GeometryMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("singular least-squares fit in {what} (rank {rank} < {unknowns} unknowns)")]
    SingularFit {
        what: &'static str,
        rank: usize,
        unknowns: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {field} at index {index}")]
    NonFinite { field: String, index: usize },

    #[error("{what} value {value} at index {index} outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        index: usize,
        lo: f64,
        hi: f64,
    },

    #[error("response at pixel ({row}, {col}) is not monotone in object temperature over the bounds")]
    NotMonotone { row: usize, col: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Wraps the error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}
