use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("not a state: {0}")]
    NotAState(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("infeasible rebuild: {0}")]
    InfeasibleRebuild(String),
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid_arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
