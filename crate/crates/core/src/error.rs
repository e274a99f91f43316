use thiserror::Error;

/// Errors raised by the numerical modules.
#[derive(Debug, Error)]
pub enum BnlsError {
    #[error("grid needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("outer radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("grid nodes must start at 0 and increase strictly (violated at index {0})")]
    NonMonotoneGrid(usize),
    #[error("degenerate grid: nodes {0} and {1} coincide to relative precision")]
    DegenerateGrid(usize, usize),
    #[error("dimension must be 1, 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite field value at node {0}")]
    NonFinite(usize),
    #[error("target node {index} at r = {r} lies outside the source range [0, {r_max}]")]
    OutsideRange { index: usize, r: f64, r_max: f64 },
    #[error("ground-state initial condition requires a ground state")]
    MissingGroundState,
    #[error("linear solve failed: pivot {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("field is identically zero")]
    ZeroField,
    #[error("spectral renormalization diverged at iteration {iteration}: {reason}")]
    SrmDivergence { iteration: usize, reason: String },
    #[error("spectral renormalization did not converge in {0} iterations")]
    SrmMaxIterations(usize),
    #[error("ground state failed verification: {0}")]
    GroundStateInvalid(String),
    #[error("non-positive weight {value} at node {index}")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("not enough samples: need {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("asymptotic formula requires rho >= 1, got {0}")]
    OutsideAsymptoticRange(f64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, BnlsError>;
