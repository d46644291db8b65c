use thiserror::Error;

/// Errors produced by the modelling, checking and testing routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("time must be finite and non-negative, got {0}")]
    NegativeTime(f64),

    #[error("no steady state in this drift regime (v_minus*lambda_plus - v_plus*lambda_minus = {denominator})")]
    NoSteadyState { denominator: f64 },

    #[error(
        "quadrature did not converge: estimated error {achieved:e} exceeds requested {requested:e}"
    )]
    QuadratureNonConvergence { achieved: f64, requested: f64 },

    #[error("sample needs at least 2 values, got {0}")]
    TooFewValues(usize),

    #[error("sample value {value} at position {position} is not a positive finite number")]
    NonPositiveValue { position: usize, value: f64 },

    #[error("alpha must lie in (0, 0.5], got {0}")]
    InvalidAlpha(f64),

    #[error("no calibration entry covers n = {0}")]
    MissingCalibration(usize),

    #[error("calibration table does not cover level {0}")]
    LevelOutOfRange(f64),

    #[error("malformed calibration table: {0}")]
    MalformedCalibration(String),

    #[error("empty grid")]
    EmptyGrid,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
