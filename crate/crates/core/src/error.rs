use thiserror::Error;

/// Errors raised by the thermodynamic closures, solvers and diagnostics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A state violates positivity or the void-fraction bounds.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The equilibrium map violates a well-posedness requirement.
    #[error("invalid model: {0}")]
    Model(String),

    /// An iterative method failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested time step exceeds a stability limit.
    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },

    /// A per-cell failure inside a sweep over the grid.
    #[error("cell {cell}: {source}")]
    Cell {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    /// A failure inside a time march.
    #[error("run aborted at t = {time:e}: {source}")]
    Run {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    /// Inputs that do not fit together (grid mismatch, too few snapshots, ...).
    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn in_cell(self, cell: usize) -> Self {
        Error::Cell {
            cell,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_time(self, time: f64) -> Self {
        Error::Run {
            time,
            source: Box::new(self),
        }
    }

    /// Cell index of the innermost per-cell failure, if any.
    pub fn cell(&self) -> Option<usize> {
        match self {
            Error::Cell { cell, .. } => Some(*cell),
            Error::Run { source, .. } => source.cell(),
            _ => None,
        }
    }

    /// Simulation time of the failure, if it happened inside a march.
    pub fn time(&self) -> Option<f64> {
        match self {
            Error::Run { time, .. } => Some(*time),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
