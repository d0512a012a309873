use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToaError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("wrong representation: expected {expected}")]
    WrongRepresentation { expected: &'static str },
    #[error("state is not supported in x < 0 (mass {mass:.3e} on x >= 0)")]
    SupportViolation { mass: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("no arrival: detected mass is {0:.3e}")]
    NoArrival(f64),
    #[error("regime precondition violated: {0}")]
    Regime(String),
    #[error("windows overlap or are out of range: {0}")]
    Window(String),
}

pub type Result<T> = std::result::Result<T, ToaError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ToaError {
    ToaError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(name, reason))
    }
}
