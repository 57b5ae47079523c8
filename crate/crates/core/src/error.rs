use thiserror::Error;

/// Errors raised across the stencil pipeline, solvers and front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unconstrainable support region at grid index {index:?} for {target}")]
    UnconstrainableRegion { index: Vec<usize>, target: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("solver diverged at step {step}")]
    Divergence { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
