use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input data or violated preconditions.
    Data,
    /// An iterative procedure failed to produce a usable result.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("self-loop on node {node} at line {line}")]
    SelfLoop { node: u64, line: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("node {0} appears more than once")]
    DuplicateNode(usize),
    #[error("node {node} out of range for graph with {node_count} nodes")]
    NodeOutOfRange { node: usize, node_count: usize },
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("phase state {state} out of range 0..{kappa}")]
    StateOutOfRange { state: u32, kappa: u32 },
    #[error("phase configuration does not match dynamics {0}")]
    PhaseKind(&'static str),
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no edges")]
    Edgeless,
    #[error("no k-path found within {steps} chain steps")]
    MaxStepsExhausted { steps: usize },
    #[error("brute-force enumeration limited to {limit} nodes, graph has {node_count}")]
    GuardExceeded { limit: usize, node_count: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("every dictionary column is zero")]
    AllColumnsZero,
    #[error("empty result: {0}")]
    Empty(String),
    #[error("class balance unattainable: {positive} positive and {negative} negative after {attempts} attempts (target {target} each)")]
    BalanceUnattainable {
        positive: usize,
        negative: usize,
        target: usize,
        attempts: usize,
    },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("invalid file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MaxStepsExhausted { .. }
            | Error::NonFinite(_)
            | Error::AllColumnsZero
            | Error::BalanceUnattainable { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
