use thiserror::Error;

use crate::driver::State;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state {0} is not part of the state space")]
    InvalidState(State),

    #[error("noise mode mismatch: {0}")]
    ModeMismatch(&'static str),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("partial result: {0}")]
    Partial(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("coupling failed within cap {cap}")]
    CouplingFailed { cap: u64 },

    #[error("window censored: {0}")]
    Censored(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
