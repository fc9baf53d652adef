use thiserror::Error;

/// Errors produced by the clustering toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty data: {0}")]
    EmptyData(String),

    /// More clusters were spawned than the configured guard allows.
    #[error("spawned more than {max_clusters} clusters at lambda={lambda}; try a larger lambda")]
    SpawnOverflow { max_clusters: usize, lambda: f64 },

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("no cluster has at least {min_size} members; cannot merge small clusters")]
    MergeImpossible { min_size: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Every paired difference was zero, so a signed-rank test has nothing to rank.
    #[error("no evidence: all differences are zero")]
    NoEvidence,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
