use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dpd_fit::FitResult;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge (last estimate {last:e}, previous {previous:e})")]
    Quadrature { last: f64, previous: f64 },

    #[error("no sign change in bracket [{lo}, {hi}] (g(lo) = {g_lo:e}, g(hi) = {g_hi:e})")]
    Bracketing { lo: f64, hi: f64, g_lo: f64, g_hi: f64 },

    #[error("non-finite objective contribution {value} at observation {index}")]
    Evaluation { index: usize, value: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("design matrix is rank deficient; dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("fit failed: {message}")]
    Fit {
        message: String,
        best: Option<Box<FitResult>>,
    },

    #[error("matrix is numerically singular (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("degenerate hypothesis: {0}")]
    HypothesisDegenerate(String),

    #[error("series did not converge within {terms} terms")]
    Series { terms: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
