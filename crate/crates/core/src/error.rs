use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {offset}")]
    Decode { path: PathBuf, offset: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("method `{method}` requires {resource}")]
    MissingResource {
        method: String,
        resource: &'static str,
    },

    #[error("no annotation for sample {id}")]
    MissingAnnotation { id: usize },

    #[error("sample {id}: {reason}")]
    Validation { id: usize, reason: String },

    #[error("non-finite difficulty for sample {id}")]
    NonFinite { id: usize },

    #[error("n-gram table of order {order} is empty; probabilities are undefined")]
    UndefinedDistribution { order: usize },

    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("no scoreable positions (every target is masked or lacks a full context)")]
    DegenerateBatch,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{file}:{line}: {message}")]
    Schema {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("eligibility violation at step {step}: sample {id} has eps {eps} above competence {lambda}")]
    Eligibility {
        step: usize,
        id: usize,
        eps: f64,
        lambda: f64,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
