//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Water-filling over a gain matrix whose entries are all zero.
    #[error("no usable dimensions: every channel gain is zero")]
    NoUsableDimensions,

    /// The RF precoder has (numerically) linearly dependent columns.
    #[error("singular RF Gram matrix")]
    SingularGram,

    /// The partition search space exceeds the configured enumeration limit.
    #[error("instance too large for exhaustive search: {0}")]
    ExhaustiveGuard(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
