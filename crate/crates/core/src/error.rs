use thiserror::Error;

/// Errors raised by samplers, analytics and the experiment engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration is inconsistent (wrong parameter counts, bad keys, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A numerical routine failed (non-convergence, loss of definiteness, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Not enough data for an estimator to be defined.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
