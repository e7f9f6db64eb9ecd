use std::path::PathBuf;

use crate::graph::{NodeId, NodeRole};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("node {node} has role {found:?}, expected {expected:?}")]
    RoleMismatch {
        node: NodeId,
        expected: NodeRole,
        found: NodeRole,
    },

    #[error("node {0} is out of range")]
    UnknownNode(NodeId),

    #[error("output node {0} has no target phase")]
    MissingTarget(NodeId),

    #[error("tangent nudging requires the free steady state as reference")]
    MissingReference,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no restart converged ({restarts} tried, {free_converged} free phases converged)")]
    NoConvergence {
        restarts: usize,
        free_converged: usize,
    },

    #[error("non-finite parameter after update in epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("bad IDX magic number: expected {expected}, found {found}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed dataset: {0}")]
    Dataset(String),

    #[error("unsupported checkpoint format version {0}")]
    FormatVersion(u32),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
