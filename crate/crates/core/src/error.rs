use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("integration diverged at step {step}: non-finite state")]
    Diverged { step: usize },

    #[error("simulation of sample (road {road}, mass {mass}) diverged at step {step}")]
    SampleDiverged { road: usize, mass: usize, step: usize },

    #[error("non-finite loss at step {step} (batch samples {batch:?})")]
    NonFiniteLoss { step: usize, batch: Vec<usize> },

    #[error("unsupported format version {found} in {path} (expected {expected})")]
    Version { path: PathBuf, found: u32, expected: u32 },

    #[error("corrupt artifact {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
