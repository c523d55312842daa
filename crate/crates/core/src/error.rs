use thiserror::Error;

use crate::polkit::DensityMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular propagation: C*q + D vanishes")]
    SingularPropagation,

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("measurement set is not informationally complete (rank {rank} of 16)")]
    IncompleteSet { rank: usize },

    /// MLE did not reach the gradient tolerance. Carries the best iterate.
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:.3e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        best: Box<DensityMatrix>,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
