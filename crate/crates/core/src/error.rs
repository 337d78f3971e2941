use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The integrator produced a NaN or infinity, usually because `dt` is too
    /// large for the stiff `1/ε` term.
    #[error("non-finite state at step {step} (t = {time}); reduce dt")]
    NonFinite { step: usize, time: f64 },

    #[error("fewer than two samples remain after subsampling")]
    EmptyResult,

    #[error("trajectories are not on the same grid: {0}")]
    GridMismatch(String),

    #[error("Gram matrix is singular or ill-conditioned: {0}")]
    SingularGram(String),

    #[error("posterior precision matrix is not positive definite")]
    SingularCovariance,

    #[error("quadrature did not converge after {0} refinements")]
    QuadratureFailure(usize),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: malformed trajectory: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
