//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length/shape.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A geometric precondition failed (e.g. a starting point that must be
    /// strictly inside a contour).
    #[error("domain error: {reason} (point ({x}, {y}))")]
    Domain { reason: &'static str, x: f64, y: f64 },

    /// Invalid input value, configuration or identifier.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A contour failed validation on construction.
    #[error("invalid contour: {0}")]
    InvalidContour(String),

    /// Input file could not be parsed.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors that indicate bad user input rather than a runtime
    /// failure; the CLI maps these to exit code 2.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Dimension { .. }
                | Error::Parameter(_)
                | Error::InvalidContour(_)
                | Error::Parse { .. }
        )
    }
}
