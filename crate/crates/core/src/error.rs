use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("graph with {size} vertices exceeds the motif size cap of {cap}")]
    MotifTooLarge { size: usize, cap: usize },

    #[error("estimate undefined: {0}")]
    Undefined(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("unknown preset `{name}`; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
