use std::path::PathBuf;

use thiserror::Error;

/// Which kind of quantity a tape leaf stands for. Used in diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafRole {
    Weight,
    Bias,
    Input,
    Constant,
}

impl std::fmt::Display for LeafRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LeafRole::Weight => "weight",
            LeafRole::Bias => "bias",
            LeafRole::Input => "input coordinate",
            LeafRole::Constant => "constant",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite {role} leaf value {value}")]
    NonFiniteLeaf { role: LeafRole, value: f64 },

    #[error("division by zero at tape node {node}")]
    DivisionByZero { node: usize },

    #[error("non-finite value recorded at tape node {node}")]
    NonFiniteValue { node: usize },

    #[error("non-finite adjoint at tape node {node}")]
    NonFiniteAdjoint { node: usize },

    #[error("jet order mismatch: {left} vs {right}")]
    JetOrderMismatch { left: usize, right: usize },

    #[error("requested derivative order {requested} exceeds jet order {order}")]
    JetOrderExceeded { requested: usize, order: usize },

    #[error("more than one network input carries a jet of order > 0")]
    JetInputConflict,

    #[error("invalid layer sizes {0:?}")]
    InvalidLayerSizes(Vec<usize>),

    #[error("network expects {expected} inputs, got {got}")]
    InputWidth { expected: usize, got: usize },

    #[error("parameter vector has length {got}, expected {expected}")]
    ParamLength { expected: usize, got: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{problem} residual needs x-jet order >= {needed_x} and t-jet order >= 1, got x={got_x}, t={got_t}")]
    InsufficientJetOrder {
        problem: &'static str,
        needed_x: usize,
        got_x: usize,
        got_t: usize,
    },

    #[error("invalid problem parameters: {0}")]
    InvalidProblem(String),

    #[error("non-finite gradient component at parameter {index}")]
    NonFiniteGradient { index: usize },

    #[error("sample set has no {0} points but its loss term is weighted")]
    EmptyKind(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
