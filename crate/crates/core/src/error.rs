use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mask has no interior cell")]
    EmptyDomain,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid exponent {0}: must lie in [1, inf]")]
    InvalidExponent(f64),
    #[error("field length {got} does not match domain size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("operator is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not meet tolerance: {0}")]
    ConvergenceFailure(String),
    #[error("symbol is not finite at eigenvalue {0}")]
    NonFiniteSymbol(f64),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("sampling grid too small: symbol is {0:e} at the boundary")]
    GridTooSmall(f64),
    #[error("time window spans {0:.3} decades, need at least 2")]
    WindowTooNarrow(f64),
    #[error("quadrature unresolved: relative change {0:e} under refinement")]
    QuadratureUnresolved(f64),
    #[error("time grid is not sorted")]
    GridNotSorted,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-positive value {0} in rate fit")]
    NonPositiveValue(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mask file: {0}")]
    MaskFormat(String),
    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
