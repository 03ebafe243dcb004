use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("matrix is not positive definite: leading minor of order {minor} is not positive")]
    NotPositiveDefinite { minor: usize },

    #[error("{what} supports n <= {max}, got n = {got}")]
    Capacity { what: &'static str, max: usize, got: usize },

    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("seed error: {0}")]
    Seed(String),

    #[error("zero-variance rows {0:?}")]
    DegenerateRows(Vec<usize>),

    #[error("node {node}: {source}")]
    Node { node: usize, source: Box<Error> },

    #[error("every lambda in the grid failed; first failure: {0}")]
    AllLambdasFailed(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for malformed inputs (as opposed to configuration problems).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}
