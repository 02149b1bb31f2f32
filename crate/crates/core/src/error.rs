use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix has {rows} rows and {cols} columns; need rows >= cols >= 1")]
    Shape { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("insufficient data: {got} rows survive the fit filter, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("no convergence after {iterations} iterations (last improvement {last_improvement:e})")]
    NonConvergence { iterations: usize, last_improvement: f64 },

    #[error("analytic moment unavailable: {0}")]
    MomentUnavailable(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
