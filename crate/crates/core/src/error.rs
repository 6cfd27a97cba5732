//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by solvers, operators and the experiment harness.
#[derive(Error, Debug)]
pub enum Error {
    /// A precondition on user input was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A compatibility condition (zero mean, solenoidality, support) failed.
    #[error("compatibility violation: {0}")]
    Compatibility(String),

    /// A time stepper detected a stability violation and aborted.
    #[error("stability violation: {0}")]
    Stability(String),

    /// Configuration file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// An expression in the motion grammar failed to parse.
    #[error("expression error at byte {pos}: {msg}")]
    Expr { pos: usize, msg: String },

    /// Wrapped I/O error.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A binary snapshot or cache file had an unexpected layout.
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn compat(msg: impl Into<String>) -> Self {
        Error::Compatibility(msg.into())
    }
}
