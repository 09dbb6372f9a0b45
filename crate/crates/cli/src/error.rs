use std::io;

use thiserror::Error;

/// Failures of a CLI verb; each maps onto one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    /// A training loop diverged; `context` names the task that failed.
    #[error("training failed in {context}: {message}")]
    Training { context: String, message: String },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Contract(_) => 1,
            CliError::Config(_) => 2,
            CliError::Training { .. } | CliError::Io(_) => 3,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

/// Core errors raised while setting up a run are configuration problems;
/// the ones raised inside training loops are wrapped at the call site.
impl From<bngp::Error> for CliError {
    fn from(e: bngp::Error) -> Self {
        match e {
            bngp::Error::Io(io) => CliError::Io(io),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
