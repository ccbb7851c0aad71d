use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the signal algebra, the network and its training.
#[derive(Debug, Error)]
pub enum Error {
    /// A center, kernel or domain operation was combined with an incompatible one.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two signals built on different kernels or domain operations were combined.
    #[error("mismatched signals: {0}")]
    Mismatch(String),

    /// A convolution would create more terms than the configured cap.
    #[error("term cap exceeded: {requested} terms requested, cap is {cap}")]
    TermCap { requested: usize, cap: usize },

    /// The pointwise nonlinearity hit a nonpositive normalizer.
    #[error("degenerate normalizer {value:e} at center {center}")]
    Degenerate { center: String, value: f64 },

    /// The Gram matrix carries no information (all entries vanish).
    #[error("degenerate kernel: {0}")]
    DegenerateKernel(String),

    /// Invalid argument or configuration value.
    #[error("invalid argument: {0}")]
    Invalid(String),

    /// Malformed input file.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
