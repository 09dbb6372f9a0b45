use std::io;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value is out of its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The operation is undefined for the given input (e.g. an empty membership).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A stateful API was used out of order.
    #[error("state error: {0}")]
    State(String),

    /// The instance exceeds an enumeration guard.
    #[error("capability error: {0}")]
    Capability(String),

    #[error("training diverged at step {step}: {message}")]
    Training { step: usize, message: String },

    #[error("metric error: {0}")]
    Metric(String),

    /// A scoring function violated its output contract.
    #[error("contract error: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
