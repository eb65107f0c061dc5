use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates its admissible range.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} values, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// Tridiagonal elimination met a zero or non-finite pivot.
    #[error("numerical breakdown at row {row}: {detail}")]
    Numerical { row: usize, detail: String },

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    /// Backtracking reduced the step below machine resolution.
    #[error("flow step failed: step shrank to {step:e} without sufficient decrease")]
    StepFailure { step: f64 },

    #[error("infeasible initializer: {0}")]
    Infeasible(String),

    #[error("degenerate deformation: {0}")]
    Degenerate(String),

    #[error("continuation failed at lambda = beta = {param:e}: {detail}")]
    Continuation { param: f64, detail: String },

    #[error("solution collapsed to the trivial critical point: {0}")]
    Collapse(String),

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("parse error at line {line}, column {column}: {detail}")]
    Parse {
        line: usize,
        column: usize,
        detail: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
