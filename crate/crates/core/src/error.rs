use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("validation failed: {0}")]
    Validation(crate::types::ValidationReport),

    /// A non-finite value appeared during stochastic updates.
    #[error("training diverged in outer iteration {outer}, minibatch {minibatch}: {detail}")]
    Diverged {
        outer: usize,
        minibatch: usize,
        detail: String,
    },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("trial {trial} failed: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(args: fmt::Arguments<'_>) -> Self {
        Error::Shape(args.to_string())
    }

    pub(crate) fn invalid(args: fmt::Arguments<'_>) -> Self {
        Error::InvalidInput(args.to_string())
    }

    /// True when the error (or the trial error it wraps) is a training divergence.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::Diverged { .. } => true,
            Error::Trial { source, .. } => source.is_divergence(),
            _ => false,
        }
    }
}
