//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimension mismatches, invalid weights, empty data.
    #[error("invalid input: {0}")]
    Input(String),

    /// A documented precondition of an operation was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A resource cap would be exceeded (e.g. product-expansion atom count).
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// Numerical failure inside a solver (non-convergence, non-finite values).
    #[error("numerical failure in {module}: {message}")]
    Numerical {
        module: &'static str,
        message: String,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn numerical(module: &'static str, msg: impl Into<String>) -> Self {
        Error::Numerical {
            module,
            message: msg.into(),
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
