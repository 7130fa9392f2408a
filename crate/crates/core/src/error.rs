use thiserror::Error;

/// Errors produced by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid radii: need 0 <= r < R, got r = {inner}, R = {outer}")]
    InvalidRadii { inner: f64, outer: f64 },
    #[error("degenerate coupling: {0}")]
    DegenerateCoupling(String),
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error("enumeration too large: {what} needs {size} but the budget is {budget}")]
    EnumerationTooLarge {
        what: &'static str,
        size: u64,
        budget: u64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("boundary of the inner ball is empty")]
    EmptyBoundary,
    #[error("unreachable source set: {0}")]
    UnreachableSources(String),
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("divergent sum: {0}")]
    Divergent(String),
    #[error("config field `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
