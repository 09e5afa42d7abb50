use thiserror::Error;

/// Errors raised by the estimation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A numeric argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Arguments are structurally inconsistent (length mismatch, bad index).
    #[error("usage error: {0}")]
    Usage(String),
    /// The mechanism cannot run under the given privacy levels.
    #[error("{mechanism} is infeasible: {reason}")]
    Infeasible { mechanism: &'static str, reason: String },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn infeasible(mechanism: &'static str, reason: impl Into<String>) -> Self {
        Error::Infeasible {
            mechanism,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
