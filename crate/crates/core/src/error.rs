use std::fmt;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid lambda table: {0}")]
    InvalidLambda(String),
    #[error("size N={n} rejected: {reason}")]
    InvalidSize { n: usize, reason: String },
    #[error("{context}: matrix not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { context: String, eigenvalue: f64 },
    #[error("non-finite membrane potential at neuron {neuron}, time {time}")]
    NonFinite { neuron: i64, time: usize },
    #[error("quadrature residual {residual:e} above threshold {threshold:e} ({context})")]
    Quadrature {
        context: String,
        residual: f64,
        threshold: f64,
    },
    #[error("entropy rate is infinite: {0}")]
    InfiniteEntropy(String),
    #[error("rate function value {value:e} below -{tol:e}")]
    NegativeRate { value: f64, tol: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::InvalidLambda(_)
                | Error::InvalidSize { .. }
                | Error::Config(_)
                | Error::Json(_)
                | Error::Shape(_)
                | Error::Unsupported(_)
        )
    }

    pub(crate) fn param(msg: impl fmt::Display) -> Self {
        Error::InvalidParameter(msg.to_string())
    }

    pub(crate) fn size(n: usize, reason: impl fmt::Display) -> Self {
        Error::InvalidSize {
            n,
            reason: reason.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
