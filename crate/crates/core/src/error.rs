use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ellipticity violated: {0}")]
    Ellipticity(String),

    #[error("dense operator too large: {dofs} degrees of freedom exceeds the cap of {cap}")]
    DofCapExceeded { dofs: usize, cap: usize },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("{method} did not converge in {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular interior system: {0}")]
    Singular(String),

    #[error("Newton iteration diverged after {iterations} steps (residual history {history:?})")]
    NewtonDiverged { iterations: usize, history: Vec<f64> },

    #[error("effective set is empty: {0}")]
    EmptyEffectiveSet(String),

    #[error("insufficient finite-difference stencil: {0}")]
    Stencil(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    ScenarioParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario validation failed: {0}")]
    ScenarioInvalid(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("missing output: {0}")]
    MissingOutput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
