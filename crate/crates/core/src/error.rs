use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value encountered while computing {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate spectrum: thresholded noise level {sigma2_hat:e} is not positive")]
    DegenerateSpectrum { sigma2_hat: f64 },

    #[error("rank-one denominator {denominator:e} does not exceed guard {guard:e}")]
    DenominatorNearZero { denominator: f64, guard: f64 },

    #[error("singular hessian (condition number {condition:e})")]
    SingularHessian { condition: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible start: theta {theta:e} must be below (1 - tau1) / tau2 = {limit:e}")]
    InfeasibleStart { theta: f64, limit: f64 },

    #[error("empty search interval ({lower:e}, {upper:e})")]
    EmptyInterval { lower: f64, upper: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
