use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    /// Invalid user-supplied setup: bad grid bounds, closure mismatch, missing input.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument outside the domain of the operation (wrong axes, grid mismatch).
    #[error("domain error: {0}")]
    Domain(String),
    /// The displacement guard of a transport sweep tripped.
    #[error("step-size error: displacement {displacement:.6e} along order {order} exceeds a third of the domain ({limit:.6e})")]
    StepSize {
        order: u8,
        displacement: f64,
        limit: f64,
    },
    #[error("undefined H: total density {0:.6e} is below threshold")]
    UndefinedH(f64),
    /// The operation refuses its input (e.g. sign-indefinite field where positivity is required).
    #[error("refused: {0}")]
    Refused(String),
}

pub type Result<T> = std::result::Result<T, ChainError>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(ChainError::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(ChainError::Domain(msg.into()))
}
