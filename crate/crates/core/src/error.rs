use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("index {idx} out of range for dataset of {len} samples")]
    IndexOutOfRange { idx: usize, len: usize },

    #[error("index {0} is not in the unlabeled pool")]
    NotUnlabeled(usize),

    #[error("p(X = {x} | Y_hat = {y}) is zero; Z_hat is undefined")]
    ZeroConditional { x: usize, y: usize },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("bad model snapshot: {0}")]
    Snapshot(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
