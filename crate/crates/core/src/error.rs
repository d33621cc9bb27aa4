use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Inputs whose index sets do not line up with the hierarchy they are used with.
    #[error("structural mismatch: {0}")]
    Structural(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("degenerate variance: sample variance is zero")]
    DegenerateVariance,

    #[error("insufficient degrees of freedom: {samples} samples for rank {rank}")]
    InsufficientDof { samples: usize, rank: usize },

    #[error("problem too large: {0}")]
    Size(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}

pub(crate) fn structural<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Structural(msg.into()))
}

pub(crate) fn parse<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}
