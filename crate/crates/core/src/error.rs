use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent or unparsable configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A numerical procedure did not reach its tolerance within budget.
    #[error("accuracy error: {message} (partial value {partial:e}, error estimate {estimate:e})")]
    Accuracy {
        message: String,
        partial: f64,
        estimate: f64,
    },

    /// Cholesky factorization failed even after diagonal jitter.
    #[error("factorization failed: smallest eigenvalue {min_eigenvalue:e}")]
    Factorization { min_eigenvalue: f64 },

    /// The operation needs a closed form that the mark family lacks.
    #[error("unsupported mark law: {0}")]
    UnsupportedLaw(String),

    /// The request exceeds a combinatorial size limit.
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    /// A caller-side precondition was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
