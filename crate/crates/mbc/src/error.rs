use thiserror::Error;

/// Errors produced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("trace line {line}: {msg}")]
    MalformedTrace { line: u64, msg: String },

    #[error("empty trace")]
    EmptyTrace,

    #[error("non-monotone timestamp at line {line}")]
    NonMonotoneTimestamp { line: u64 },

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("invalid {what}: {msg}")]
    InvalidParameter { what: &'static str, msg: String },

    #[error("hyperparameter bounds are empty: {0}")]
    EmptyBounds(String),

    #[error("Cholesky factorization failed after jitter escalation to {max_jitter:e}")]
    CholeskyFailure { max_jitter: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidParameter {
            what,
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
