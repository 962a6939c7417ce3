use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("missing Sobolev constant {kind} (p = {p}, q = {q})")]
    MissingConstant { kind: String, p: f64, q: f64 },

    /// A bound was requested outside the regime of its theorem.
    #[error("{bound} inapplicable: {reason}")]
    Inapplicable { bound: &'static str, reason: String },

    #[error("{op}: {reason}")]
    Precondition { op: &'static str, reason: String },

    #[error("fixed-point iteration stalled at step {step} (residual {residual:.3e})")]
    Picard { step: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    Linear(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(op: &'static str, reason: impl Into<String>) -> Error {
    Error::Precondition {
        op,
        reason: reason.into(),
    }
}

pub(crate) fn inapplicable(bound: &'static str, reason: impl Into<String>) -> Error {
    Error::Inapplicable {
        bound,
        reason: reason.into(),
    }
}
