use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum FemError {
    #[error("refinement level {level} exceeds the limit {limit}")]
    Resource { level: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("reconstruction rejected: residual {residual:.3e} exceeds {tolerance:.3e}")]
    Reconstruction { residual: f64, tolerance: f64 },

    #[error("dual variable infeasible on {} element(s)", elements.len())]
    Infeasible { elements: Vec<usize> },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FemError>;
