use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the data pipeline, the networks and the training harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A pretrained backend (CLIP, VGG) could not be loaded. Kept apart from
    /// [`Error::Shape`] so callers can tell a missing weight file from a bad input.
    #[error("failed to load {backend} weights from {}: {reason}", path.display())]
    BackendLoad {
        backend: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("non-finite value in loss term `{term}` at iteration {iteration}")]
    NonFinite { term: &'static str, iteration: u64 },

    #[error("checkpoint is missing the `{0}` namespace")]
    MissingNamespace(String),

    #[error("checkpoint {}: {reason}", path.display())]
    Checkpoint { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
