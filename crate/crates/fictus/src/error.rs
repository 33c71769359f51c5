use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no prolongation order exists with more equations than unknowns (c <= m/2)")]
    NoProlongationExists,
    #[error("prolongation order limit {0} exceeded")]
    LimitExceeded(usize),
    #[error("no square candidate at p = {0}; increase p")]
    NoSquareCandidate(usize),
    #[error("block is numerically singular at p = {p} (rcond = {rcond:e})")]
    NotSolvableAtP { p: usize, rcond: f64 },
    #[error("matching is not maximum: augmenting path from row {0}")]
    InvalidMatching(usize),
    #[error("time {0} outside the open interval (0, T)")]
    OutOfRange(f64),
    #[error("auxiliary function construction failed: {0}")]
    ConstructionFailed(String),
    #[error("control region too small for nesting depth: {0}")]
    DegenerateRegion(String),
    #[error("step matrix factorization failed at pivot {0}")]
    IllConditionedStep(usize),
    #[error("non-finite values in trajectory at step {0}")]
    Diverged(usize),
    #[error("conjugate gradient stalled after {iters} iterations (residual {residual:e})")]
    NotConverged { iters: usize, residual: f64 },
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
