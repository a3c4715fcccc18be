use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    /// A data-level check failed (ellipticity, mask admissibility, shapes).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("solver error: {message} (relative residual {residual:.3e})")]
    Solver { message: String, residual: f64 },

    #[error("nonlinear iteration did not converge in {iterations} iterations (last increment {increment:.3e})")]
    NoConvergence { iterations: usize, increment: f64 },

    /// A bound that must hold by theory was observed to fail.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
