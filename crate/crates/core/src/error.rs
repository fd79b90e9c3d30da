use thiserror::Error;

/// Errors raised by the simulator and the protocol layer.
///
/// `Exhausted` and `RoundsExhausted` are statistical outcomes rather than
/// bugs: they report that a post-selection or a round budget ran out.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("resource error: {0}")]
    Resource(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("state error: {0}")]
    State(String),
    #[error("post-selection exhausted after {attempts} attempts")]
    Exhausted { attempts: u64 },
    #[error("no successful round within {rounds} rounds")]
    RoundsExhausted { rounds: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
