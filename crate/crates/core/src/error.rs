use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("index {index} out of range for mode {mode} (size {size})")]
    IndexOutOfRange {
        mode: usize,
        index: usize,
        size: usize,
    },

    #[error("multi-index has {got} components, tensor has order {expected}")]
    IndexArity { expected: usize, got: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("element count mismatch: expected {expected}, got {got}")]
    ElementCount { expected: usize, got: usize },

    #[error("invalid mode {mode} for a tensor of order {order}")]
    InvalidMode { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("rank chain mismatch at core {0}")]
    RankChain(usize),

    #[error("non-finite entry in input")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("factorization failed in mode {mode}: {reason}")]
    Factorization { mode: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, TensorError>;
