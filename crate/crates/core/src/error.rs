use thiserror::Error;

/// Errors raised by the library outside of the wire codec.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("tribonacci value F_{index} overflows 64 bits")]
    Overflow { index: u32 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no pump value is consistent with {0}")]
    Inconsistent(String),

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("invalid state: {0}")]
    State(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
