use std::path::PathBuf;

/// Errors raised anywhere in the simulation chain.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inconsistent or out-of-range scenario parameters.
    #[error("configuration error: {0}")]
    Config(String),
    /// A function was called with arguments that violate its contract.
    #[error("invalid argument: {0}")]
    Argument(String),
    /// Channel estimation could not produce a solution (e.g. singular normal equations).
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
