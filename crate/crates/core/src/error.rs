use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum SignaError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("degenerate embedding: row {row} has norm below 1e-12")]
    DegenerateEmbedding { row: usize },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("optimization failed: non-finite gradient for parameter `{param}`")]
    Optimization { param: String },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("{}:{line}: {msg}", path.display())]
    Ingestion {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("degenerate graph: {0}")]
    DegenerateGraph(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl SignaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SignaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        SignaError::Config(vec![msg.into()])
    }
}

pub type Result<T> = std::result::Result<T, SignaError>;
