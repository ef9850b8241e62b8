use thiserror::Error;

/// Errors produced by the analysis toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    /// A computation produced values inconsistent with its mathematical
    /// contract (e.g. a Gram eigenvalue well below zero).
    #[error("numerical consistency: {0}")]
    Numerical(String),
    /// The requested exhaustive search exceeds the supported keyspace.
    #[error("keyspace of 2^{bits} keys exceeds the supported bound of 2^{max_bits}")]
    KeyspaceTooLarge { bits: u32, max_bits: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
