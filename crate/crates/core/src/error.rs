//! Error type shared by every module of the crate.

use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("shape conflict at node `{node}`: {detail}")]
    ShapeConflict { node: String, detail: String },

    #[error("non-finite value produced at `{0}`")]
    NonFiniteValue(String),

    #[error("invalid graph:\n{0}")]
    InvalidGraph(ValidationReport),

    #[error("cycle detected through nodes [{}]", .0.join(", "))]
    CycleDetected(Vec<String>),

    #[error("graph is not weakly connected")]
    NotConnected,

    #[error("missing input tensor for `{0}`")]
    MissingInput(String),

    #[error("missing target for output node `{0}`")]
    MissingTarget(String),

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("value map is stale for this graph: {0}")]
    InvalidValues(String),

    #[error("rule requires a nonempty subset: {0}")]
    EmptySubset(String),

    #[error("node id `{0}` already exists")]
    NodeCollision(String),

    #[error("base networks share node `{0}`")]
    NotDisjoint(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }
}
