use std::path::PathBuf;

use crate::solver::IterationHistory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("geometry error in cell {cell}: {reason}")]
    Geometry { cell: usize, reason: String },

    #[error("mesh is not conforming: {0}")]
    NonConforming(String),

    #[error("singular local matrix in cell {cell} ({what})")]
    SingularLocal { cell: usize, what: &'static str },

    #[error("global matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("nonlinear iteration did not converge after {} iterations (last update {:.3e})", .history.len(), .history.last_update())]
    NotConverged { history: IterationHistory },

    #[error("richardson iteration diverging at iteration {iteration}; the step size eps is probably too large")]
    Diverged { iteration: usize, history: IterationHistory },

    #[error("mesh file {path}: {reason}")]
    MeshFormat { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
