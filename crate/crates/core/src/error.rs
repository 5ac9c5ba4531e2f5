use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry parse error at row {row}, column {column}: {message}")]
    GeometryParse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("domain not percolating: no fluid path connects inlet to outlet")]
    NotPercolating,

    #[error("{solver} did not converge after {steps} steps (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        steps: usize,
        residual: f64,
    },

    #[error("{solver} blew up at cell ({x}, {y}): {detail}")]
    Blowup {
        solver: &'static str,
        x: usize,
        y: usize,
        detail: String,
    },

    #[error("mediator depleted: reduced mediator below floor")]
    MediatorDepleted,

    #[error("biofilm clogged: no free space reachable from ({x}, {y}) within {steps} walk steps")]
    Clogged { x: usize, y: usize, steps: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
