use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An operation was called outside its documented preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A formula was evaluated outside the interval on which it is defined.
    #[error("domain error: {what} requires {requirement}, got {value}")]
    Domain {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },

    /// The recovery theorem backing a constant does not apply.
    #[error("theorem inapplicable ({theorem}): {clause}")]
    Inapplicable { theorem: &'static str, clause: String },

    /// Exact support enumeration would exceed the enumeration guard.
    #[error(
        "too large for exact computation: {supports} supports exceed the limit of {limit}; \
         shrink (d, s) or use the randomized lower bound"
    )]
    TooLarge { supports: u128, limit: u128 },

    /// An audit precondition does not hold, so the audit is refused.
    #[error("audit rejected: {0}")]
    Rejected(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    /// True for errors caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
