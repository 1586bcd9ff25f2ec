use std::io;

use thiserror::Error;

/// Errors produced by amalgam-core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice index {index:?} lies outside truncation radius {radius}")]
    IndexOutOfRange { index: Vec<i64>, radius: i64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0}: {1}")]
    UnsupportedDimension(usize, &'static str),

    #[error("incompatible geometry: {0}")]
    Geometry(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("band set is empty or incomplete: {0}")]
    MissingBands(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
