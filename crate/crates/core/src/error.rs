use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point has empty support")]
    EmptySupport,

    #[error("point has zero mass")]
    ZeroMass,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("point mass {mass} exceeds 1 (tolerance {tol:e})")]
    MassOutOfRange { mass: f64, tol: f64 },

    #[error("coefficient range violates |a| <= 1: {0}")]
    InvalidRange(String),

    #[error("block is not skew-symmetric: {0}")]
    NotSkew(String),

    #[error("scan dimension must be at least 2, got {0}")]
    ScanDimTooSmall(usize),

    #[error("mass drifted from {expected} to {actual}")]
    MassDrift { expected: f64, actual: f64 },

    #[error("coordinate {index} became negative ({value:e})")]
    NegativeCoordinate { index: usize, value: f64 },

    #[error("operator is not in a tilde class: {0}")]
    NotTilde(String),

    #[error("step {step}: {source}")]
    Iteration {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid functional: {0}")]
    InvalidFunctional(String),

    #[error("invalid budget: {0}")]
    InvalidBudget(String),

    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Iteration {
            step,
            source: Box::new(self),
        }
    }
}
