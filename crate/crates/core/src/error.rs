use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("sparsity level {s} out of range for length {m}")]
    Sparsity { s: usize, m: usize },

    #[error("enumeration budget exceeded: {count} supports > limit {limit}")]
    Budget { count: u128, limit: u128 },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        op,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
