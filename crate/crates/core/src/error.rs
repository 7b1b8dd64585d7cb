use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("seed has {available} bits per row but {required} are required")]
    InsufficientSeedBits { required: usize, available: usize },

    #[error(
        "candidate grid needs {required} evaluations, above the budget of {budget}; \
         use bracket bounds instead"
    )]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("chaining depth H = {depth} for N = {n}, d = {d}; at least 1 is required")]
    ChainInfeasible { n: u64, d: usize, depth: i64 },

    #[error("malformed cover: {0}")]
    MalformedCover(String),

    #[error("enumeration guard exceeded: {cells_log2} cell bits > {limit}")]
    GuardExceeded { cells_log2: u32, limit: u32 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
