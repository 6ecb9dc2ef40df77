use thiserror::Error;

/// Errors raised while building or evaluating the construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed config: {0}")]
    Config(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("index {0} appears in both the null and the complementary index sets")]
    OverlappingIndices(usize),

    #[error("index {0} listed twice")]
    DuplicateIndex(usize),

    #[error("null index set is empty")]
    EmptyNullSequence,

    #[error("complementary index set is empty")]
    EmptyPerp,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("derivative order {requested} exceeds configured maximum {max}")]
    OrderExceeded { requested: usize, max: usize },

    #[error("enumeration contains no scale j < 0; no subsequence with j -> -inf is available")]
    NoCoarseScales,

    #[error("budget exhausted before placing h for k = {k}: need a scale j <= {required_j}")]
    BudgetExhausted { k: usize, required_j: i32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
