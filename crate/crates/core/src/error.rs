use std::path::PathBuf;

/// Errors raised by graph construction, the STM kernels and the tooling around them.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("graph contains a directed cycle through node {node}")]
    Cycle { node: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("path enumeration exceeded the cap of {cap} paths")]
    PathExplosion { cap: usize },

    #[error("decomposition strategy {strategy} does not apply: {reason}")]
    StrategyMismatch { strategy: &'static str, reason: String },

    #[error("decomposition does not match the graph: {0}")]
    DecompositionMismatch(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("length {len} is not a power of two matching {levels} levels")]
    Length { len: usize, levels: usize },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("column {column} of node {node} is all zero; cannot normalize to criticality")]
    DegenerateColumn { node: usize, column: usize },

    #[error("rejection sampling gave up after {attempts} attempts")]
    RejectionLimit { attempts: usize },

    #[error("loss is not finite")]
    NonFiniteLoss,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed tensor file {path}: {msg}")]
    TensorFormat { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
