use thiserror::Error;

use crate::hardy::ConditionReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("alpha[{row}][{col}] = {value} must be zero on and above the diagonal")]
    NonTriangularAlpha { row: usize, col: usize, value: f64 },

    #[error("alpha[{row}][{col}] = {value} is negative")]
    NegativeExponent { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("block index {index} out of range for k = {k}")]
    IndexOutOfRange { index: usize, k: usize },

    #[error("dilation factor must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("regularization epsilon must be positive, got {0}")]
    NonPositiveEpsilon(f64),

    #[error("point is on a degenerate set: {0}")]
    DegeneratePoint(String),

    #[error("operation requires a Grushin system (k = 2), got k = {0}")]
    NotGrushin(usize),

    #[error("admissibility conditions not met")]
    ConditionsNotMet(Box<ConditionReport>),

    #[error("integrand is not finite ({value}) at a sampled point")]
    NonIntegrableSample { value: f64 },

    #[error("lambda-divergence is not positive ({0}) at a sampled point")]
    NonPositiveDivergence(f64),

    #[error("denominator estimate {value} is within 3 standard errors ({std_error}) of zero")]
    DegenerateDenominator { value: f64, std_error: f64 },

    #[error("{rejected} of {samples} samples landed on degenerate sets (limit 0.1%)")]
    TooManyRejections { rejected: u64, samples: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegeneratePoint(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
