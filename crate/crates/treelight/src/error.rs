//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A file violated its schema; `line` is 1-based and counts the header.
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    Input(String),

    /// The weather series does not cover a requested instant or day.
    #[error("weather series does not cover {0}")]
    WeatherCoverage(String),

    #[error("voxel grid is empty: every voxel fell below the minimum weight")]
    EmptyGrid,

    #[error("voxel grid orientation does not match the requested ray direction")]
    OrientationMismatch,

    /// Regression or calibration input was degenerate.
    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
