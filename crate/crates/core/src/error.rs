use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: unknown {kind} `{label}` in frozen vocabulary")]
    UnknownLabel {
        path: PathBuf,
        line: usize,
        kind: &'static str,
        label: String,
    },

    #[error("{path}:{line}: duplicate triple ({subject}, {relation}, {object})")]
    DuplicateTriple {
        path: PathBuf,
        line: usize,
        subject: String,
        relation: String,
        object: String,
    },

    #[error("{what} index {index} out of bounds (size {bound})")]
    IndexOutOfBounds {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("inverse relations have already been added to this store")]
    AlreadyAugmented,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("NaN encountered in {0}")]
    NotANumber(&'static str),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{what} mismatch: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("split `{0}` is empty")]
    EmptySplit(&'static str),

    #[error("model file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
