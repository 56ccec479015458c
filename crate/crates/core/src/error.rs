//! Error type shared across the library.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The input table or a sidecar file could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A feature schema violation (unmapped column, missing feature, role mismatch).
    #[error("schema error: {0}")]
    Schema(String),

    /// A caller-supplied parameter is out of range or inconsistent.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// A numerical procedure failed (non-finite values, singular matrix, empty fit).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A persisted model file is unreadable or has the wrong format version.
    #[error("model file error: {0}")]
    Model(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Error {
        Error::Parse(e.to_string())
    }
}

impl Error {
    /// True for errors caused by malformed input rather than internal numerics.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
