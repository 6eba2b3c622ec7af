use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the training engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node id {id} out of range for graph with {num_nodes} nodes")]
    NodeOutOfRange { id: usize, num_nodes: usize },

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {0} has no self-loop")]
    MissingSelfLoop(usize),

    #[error("cannot sample {needed} negative edges: only {available} non-edges exist")]
    NotEnoughNonEdges { needed: usize, available: usize },

    #[error("no labeled training node")]
    NoLabeledTrainingNodes,

    #[error("at least two classes are required, found {0}")]
    TooFewClasses(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("method {method} is not usable for {context}")]
    MethodMismatch { method: String, context: String },

    #[error("release of untracked allocation `{0}`")]
    UntrackedRelease(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
