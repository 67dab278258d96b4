use thiserror::Error;

use crate::corrmat::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {n}: {reason}")]
    InvalidDimension { n: usize, reason: &'static str },

    #[error("invalid rank {rank} for dimension {n} (need 1 <= rank <= n)")]
    InvalidRank { n: usize, rank: usize },

    #[error("not a correlation matrix: {0}")]
    InvalidMatrix(ValidationReport),

    #[error("invalid exponent p = {0} (need p > 0)")]
    InvalidExponent(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "exhaustive signed-permutation search infeasible for n = {n} (limit {limit}); \
         use the heuristic mode"
    )]
    ExhaustiveInfeasible { n: usize, limit: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zone configuration has no centers")]
    EmptyCenters,

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
}
