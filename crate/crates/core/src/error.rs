use thiserror::Error;

/// Errors raised by the FMM engine and its helpers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FmmError {
    #[error("theta must lie in the open interval (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("expansion order must be at least 1, got {0}")]
    InvalidOrder(usize),
    #[error("leaf target must be at least 1")]
    InvalidLeafTarget,
    #[error("source set is empty")]
    EmptySources,
    #[error("source {index} has a non-finite position or strength")]
    NonFiniteSource { index: usize },
    #[error("expansion orders differ ({left} vs {right})")]
    OrderMismatch { left: usize, right: usize },
    #[error("expansion kinds or kernels do not match for this operator")]
    KindMismatch,
    #[error("expansion centers coincide")]
    CoincidentCenters,
    #[error(
        "separation ratio undefined: center distance {distance} does not exceed radius {radius}"
    )]
    SeparationDomain { distance: f64, radius: f64 },
    #[error("direct summation of {n} sources exceeds the guard of {guard}")]
    DirectGuardExceeded { n: usize, guard: usize },
    #[error("distribution width sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("count must be at least 1")]
    InvalidCount,
    #[error("sample index {0} out of range")]
    SampleIndexOutOfRange(usize),
    #[error("result and reference lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, FmmError>;
