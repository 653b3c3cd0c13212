use thiserror::Error;

/// Failures raised by the model-building and solving layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HedgeError {
    /// The lattice parameters admit arbitrage, so no unique martingale measure exists.
    #[error("no-arbitrage condition violated: {0}")]
    Arbitrage(String),
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A configured size cap would be exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// A level function is not attainable on some market path.
    #[error("level not attainable: {0}")]
    Membership(String),
}

pub type Result<T> = std::result::Result<T, HedgeError>;

pub(crate) fn domain(msg: impl Into<String>) -> HedgeError {
    HedgeError::Domain(msg.into())
}
