//! Error types shared by the numerical modules.

use thiserror::Error;

/// Errors raised by kernel construction, the solvers, and the estimators.
#[derive(Debug, Error)]
pub enum Error {
    /// Two operands disagree on a dimension that must match.
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// An input carries a NaN or infinite entry.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A parameter violates its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix factorization failed.
    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    /// Model artifact does not match the data it is applied to.
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
}

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl Into<String>,
        actual: impl Into<String>,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
