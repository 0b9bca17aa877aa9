use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// `delta_q > 1/(2q)` where the caller required an unsaturated value.
    #[error("saturated radius at q = {q}: delta = {delta} exceeds 1/(2q)")]
    Saturation { q: u64, delta: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("insufficient precision: {0}")]
    Precision(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
