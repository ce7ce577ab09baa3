use thiserror::Error;

/// Errors raised by solvers, decompositions and loaders.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid LMDP: {0}")]
    InvalidLmdp(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("state {state} has no successor with positive value")]
    DeadState { state: usize },

    #[error("policy puts mass on {successor}, outside the support of P(.|{state})")]
    SupportViolation { state: usize, successor: usize },

    #[error("behavior probability must be positive")]
    ZeroBehaviorProbability,

    #[error("subtasks not equivalent: partition {partition}, state {state}: {detail}")]
    NotEquivalent {
        partition: usize,
        state: usize,
        detail: String,
    },

    #[error("dangling successor: state {state} of partition {partition} reaches {successor}, which has no terminal slot")]
    DanglingSuccessor {
        partition: usize,
        state: usize,
        successor: usize,
    },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("exit state {0} is not covered by any partition")]
    UncoveredExit(usize),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid geometry: {0}")]
    Geometry(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
