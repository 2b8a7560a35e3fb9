use std::path::PathBuf;

/// Errors produced by the evaluation toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("failed to decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("format error in {path} at {position}: {message}")]
    Format {
        path: PathBuf,
        position: String,
        message: String,
    },

    #[error("schema violation at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("embedding provider unreachable: {0}")]
    ProviderUnreachable(String),

    #[error("embedding provider protocol error: {0}")]
    Protocol(String),

    #[error("no embedding found for text hash {hash}")]
    NotFound { hash: String },

    #[error("embedding provider failed for document '{id}': {source}")]
    Provider {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by front ends to pick exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_)
            | Error::InsufficientSamples { .. }
            | Error::DimensionMismatch(_)
            | Error::Schema { .. } => ErrorKind::Usage,
            Error::Decode { .. } | Error::Format { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::Degenerate(_) | Error::NotPsd { .. } | Error::Numeric(_) => ErrorKind::Numeric,
            Error::ProviderUnreachable(_) | Error::Protocol(_) | Error::NotFound { .. } => {
                ErrorKind::Provider
            }
            Error::Provider { source, .. } => match source.kind() {
                ErrorKind::Usage => ErrorKind::Usage,
                _ => ErrorKind::Provider,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Io,
    Numeric,
    Provider,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
