//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building instances, running the
/// optimizers, or shuttling fronts and configurations through files.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent geometric input (mismatched lengths, non-finite
    /// coordinates, unknown element ids, ...).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// An operation that needs at least one active element was handed an
    /// all-inactive genome.
    #[error("empty shape: {0}")]
    EmptyShape(String),

    /// A parameter is outside its documented range, or a configuration key
    /// is unknown.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller violated an API contract (length mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A linear system (or its incremental update) is numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Shorthand for a [`Error::Contract`] with a formatted message.
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// Shorthand for a [`Error::Config`] with a formatted message.
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
