//! Error type shared across the engine.

use alloc::string::String;

/// Errors produced by the engine's fallible operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// An argument violated a precondition (range, shape, missing field).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A referenced action, archetype, or pending entry does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// A context with zero total feature mass makes the context-weighted
    /// Beta parameters undefined.
    #[error("degenerate context: {0}")]
    DegenerateContext(String),

    /// The operation only applies to a different action-space mode.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// A pending feedback entry was already resolved.
    #[error("already resolved: {0}")]
    AlreadyResolved(String),

    /// The responder failed to produce a response.
    #[error("responder error: {0}")]
    Responder(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn not_found(msg: impl Into<String>) -> Self {
        Error::NotFound(msg.into())
    }
}
