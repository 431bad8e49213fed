use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pose: quaternion norm {norm} is not within 1e-6 of 1")]
    InvalidPose { norm: f64 },

    #[error("empty samples: {0}")]
    EmptySamples(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ingestion error at {location}: {message}")]
    Ingestion { location: String, message: String },

    #[error("degenerate timing: frames {first} and {second} share timestamp {timestamp}")]
    DegenerateTiming { first: usize, second: usize, timestamp: f64 },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("missing embedding for key {0:?}")]
    MissingEmbedding(String),

    #[error("embedding cache format error: {0}")]
    CacheFormat(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged at epoch {epoch}, step {step}: loss {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("empty scene index")]
    EmptyScene,

    #[error("empty evaluation set: {0}")]
    EmptyEval(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid path endpoint: {0}")]
    InvalidEndpoint(String),

    #[error("scene generation failed: {0}")]
    Generation(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("I/O error at {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn ingestion(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Ingestion { location: location.into(), message: message.into() }
    }
}
