use thiserror::Error;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input contains no observations")]
    EmptyInput,
    #[error("sampling point {0} lies outside [0, 1]")]
    TOutOfRange(f64),
    #[error("non-finite value in input")]
    NonFiniteValue,
    #[error("subject {0} has no observations")]
    EmptySubject(i64),
    #[error("at least two distinct sampling points are required, found {0}")]
    TooFewPoints(usize),
    #[error("{observations} observations cannot identify a spline of penalty order {r}")]
    InsufficientData { observations: usize, r: usize },
    #[error("point {t} lies outside the spline domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("derivative order {deriv} is not below the spline order {order}")]
    DerivativeOrder { deriv: usize, order: usize },
    #[error("invalid tuning parameter: {0}")]
    InvalidTuning(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("penalized system is numerically singular")]
    SingularSystem,
    #[error("every fit on the smoothing-parameter grid failed")]
    AllFitsFailed,
    #[error("explicit eigensystem is only available for r = 1, got r = {0}")]
    UnsupportedOrder(usize),
    #[error("function is identically zero")]
    ZeroFunction,
}

pub type Result<T> = std::result::Result<T, Error>;
