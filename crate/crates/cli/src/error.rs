use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed file, wrong shapes or dimensions.
    #[error("parse error: {0}")]
    Parse(String),
    /// The instance parsed but one of its objects fails a structural invariant.
    #[error("invalid instance: {0}")]
    Invalid(#[from] ncrep_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn parse(msg: impl Into<String>) -> Self {
        CliError::Parse(msg.into())
    }

    /// Name of the violated invariant, if this is an invariant violation.
    pub fn invariant(&self) -> Option<&str> {
        match self {
            CliError::Invalid(ncrep_core::Error::InvariantViolation { invariant, .. }) => Some(invariant),
            _ => None,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
