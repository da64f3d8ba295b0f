//! Error types shared across the crate.
//!
//! The four-way split mirrors how callers must react: malformed input is a
//! parse problem, a violated operation contract is a precondition problem,
//! and a broken internal invariant means the construction itself is wrong
//! (those should never fire on valid inputs and are bugs when they do).

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input could not be parsed or is structurally malformed
    /// (bad JSON, unknown vertex ids, digits out of range, q out of range).
    #[error("malformed input: {0}")]
    Malformed(String),

    /// A caller-visible operation contract was violated
    /// (invalid presentation, dependent set where an independent one is
    /// required, class bound exceeded, ...).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An internal construction invariant failed. This indicates a bug in
    /// the construction, not in the input.
    #[error("invariant violation: {0}")]
    Invariant(String),
}

impl Error {
    pub fn malformed(msg: impl Into<String>) -> Self {
        Error::Malformed(msg.into())
    }

    pub fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Malformed(_) => 2,
            Error::Precondition(_) => 3,
            Error::Invariant(_) => 4,
        }
    }
}
