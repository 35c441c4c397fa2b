use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("conflicting signs for edge ({src}, {dst}) at line {line}")]
    Conflict { src: String, dst: String, line: usize },

    #[error("self-loop on node {node} at line {line}")]
    SelfLoop { node: String, line: usize },

    #[error("graph has no negative edges; gamma must be supplied explicitly")]
    NoNegativeEdges,

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(&'static str),

    #[error("loss diverged at layer {layer}, epoch {epoch}")]
    Divergence { layer: usize, epoch: usize },

    #[error("graph must contain both positive and negative edges")]
    MissingEdgeClass,

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("no negative-class examples")]
    NoNegativeExamples,

    #[error("k = {k} exceeds the number of points n = {n}")]
    KExceedsN { k: usize, n: usize },

    #[error("eigensolver did not converge: {0}")]
    Convergence(String),

    #[error("unknown profile: {0}")]
    UnknownProfile(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("graph with {n} nodes exceeds the dense materialization cap of {cap}")]
    TooLargeForDense { n: usize, cap: usize },

    #[error("test edge ({0}, {1}) leaked into the training graph")]
    Leakage(usize, usize),

    #[error("invalid matrix file {path}: {message}")]
    MatrixFormat { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from numerical failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteGradient(_) | Error::Divergence { .. } | Error::Convergence(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
