use thiserror::Error;

/// Errors surfaced by mesh construction, assembly, solves and the drivers built on them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// A configuration or parameter set violates one of the model assumptions.
    #[error("assumption {assumption} violated: {detail}")]
    Assumption { assumption: &'static str, detail: String },

    #[error("operator is not positive definite: pivot {pivot} at row {row}")]
    Indefinite { row: usize, pivot: f64 },

    #[error("linear solve did not reach tolerance: relative residual {residual:e} > {tolerance:e}")]
    SolveNotConverged { residual: f64, tolerance: f64 },

    #[error(
        "fixed-point iteration failed to contract after {iterations} iterations \
         (last update norms {previous:e}, {last:e})"
    )]
    NonContraction {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("coupled outer iteration did not converge after {iterations} iterations (update {update:e})")]
    CouplingNotConverged { iterations: usize, update: f64 },

    #[error("point {point:?} lies outside the mesh")]
    PointOutside { point: Vec<f64> },

    #[error("dense exponential limited to {limit} micro dofs, got {dofs}; use the time stepper")]
    DimensionExceeded { dofs: usize, limit: usize },

    #[error("adaptive loop did not reach the tolerance in {rounds} rounds (eta_R trace {trace:?})")]
    AdaptIncomplete { rounds: usize, trace: Vec<f64> },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification of [`Error`], used for exit codes and error records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Solver,
    AdaptIncomplete,
    Io,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Solver => "solver",
            ErrorCategory::AdaptIncomplete => "adapt_incomplete",
            ErrorCategory::Io => "io",
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Validation(_) | Error::Assumption { .. } | Error::Json(_) => ErrorCategory::Config,
            Error::Indefinite { .. }
            | Error::SolveNotConverged { .. }
            | Error::NonContraction { .. }
            | Error::CouplingNotConverged { .. }
            | Error::PointOutside { .. }
            | Error::DimensionExceeded { .. } => ErrorCategory::Solver,
            Error::AdaptIncomplete { .. } => ErrorCategory::AdaptIncomplete,
            Error::Format { .. } | Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
