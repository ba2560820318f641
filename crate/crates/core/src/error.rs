use thiserror::Error;

/// Errors raised by the solvers and the experiment harness.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum SheqError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step restriction violated: tau * L_f = {product} must be < 1/2")]
    StepRestriction { product: f64 },

    #[error("noise assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("covariance not positive semidefinite (conditional variance {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("index {0} is not a valid wavelet index")]
    InvalidIndex(String),

    #[error("coefficient support is not a tree: {0} present without its parent")]
    NotATree(String),

    #[error("refinement exhausted: {0}")]
    RefinementExhausted(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("at time step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<SheqError>,
    },

    #[error("inconsistent path refinement: {0}")]
    InconsistentRefinement(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl SheqError {
    pub(crate) fn at_step(self, step: usize) -> Self {
        SheqError::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for SheqError {
    fn from(e: std::io::Error) -> Self {
        SheqError::Io(e.to_string())
    }
}

impl From<csv::Error> for SheqError {
    fn from(e: csv::Error) -> Self {
        SheqError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SheqError>;
