use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("point outside model chart: {0}")]
    Domain(String),

    #[error("r = {r} is not a regular value of b (need r^2 > {bound})")]
    NotRegular { r: f64, bound: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("catalog is complete only up to lambda = {lambda_max}, requested {requested}")]
    Completeness { lambda_max: f64, requested: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("iteration did not converge in {max_iter} steps (contraction ratio {ratio}, last step {last_step:e})")]
    Iteration {
        max_iter: usize,
        ratio: f64,
        last_step: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("grid is missing radius {0}")]
    MissingGridPoint(f64),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
