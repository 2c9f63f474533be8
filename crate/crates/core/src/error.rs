use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    SpecInvalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("degenerate instance: {0}")]
    DegenerateInstance(String),
    #[error("solver did not converge after {iters} iterations (feasibility residual {feas_residual:e})")]
    NotConverged { iters: usize, feas_residual: f64 },
    #[error("Gram matrix is not positive definite")]
    SingularGram,
    #[error("p = 2 has no n-driven transition")]
    BoundaryP,
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("bracket does not contain the target: {0}")]
    BracketInvalid(String),
    #[error("need at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("non-positive value {0} cannot be log-transformed")]
    NonPositiveValue(f64),
    #[error("CSV schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
