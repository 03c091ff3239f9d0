use thiserror::Error;

use crate::admm::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("infeasible input: {0}")]
    Infeasible(String),

    /// A per-pixel scalar solve failed; the partial report holds the iterates
    /// at the moment of failure.
    #[error("inner solver failed at pixel {pixel} (outer iteration {iteration}): {reason}")]
    InnerSolver {
        pixel: usize,
        iteration: usize,
        reason: String,
        report: Box<SolveReport>,
    },

    #[error("solver did not converge after {} iterations", report.iterations)]
    NotConverged { report: Box<SolveReport> },

    #[error("identity check failed: {0}")]
    Identity(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }
}
