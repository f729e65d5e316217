use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Variants map onto the CLI exit codes:
/// configuration problems exit with 2, everything else with 1.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The input is too small or too degenerate for the operation.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Hyperparameters or sampler settings are inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("replicate {index}: {source}")]
    Replicate {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    /// True for errors caused by bad configuration rather than runtime failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Degenerate(_) => true,
            Error::Replicate { source, .. } => source.is_config(),
            Error::Io { .. } | Error::Format { .. } => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
