use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid jump driver: {0}")]
    InvalidDriver(String),

    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("non-finite {what} in regime {regime} at x = {point:?}")]
    NonFiniteCoefficient {
        what: &'static str,
        regime: usize,
        point: Vec<f64>,
    },

    #[error("non-finite state at step {step} (t = {time})")]
    NonFiniteState { step: usize, time: f64 },

    #[error("step size underflow at step {step} (t = {time}, h = {step_size})")]
    ZeroProgress {
        step: usize,
        time: f64,
        step_size: f64,
    },

    #[error("time {time} outside [0, {horizon}]")]
    TimeOutOfRange { time: f64, horizon: f64 },

    #[error("operation requires a {expected} jump driver")]
    UnsupportedDriver { expected: &'static str },

    #[error("Levy moment of order {order} diverges")]
    DivergentMoment { order: f64 },

    #[error("no geometric ergodicity: contraction rate alpha = {0} must be negative")]
    NotErgodic(f64),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("level {level}: {failed} of {attempted} samples failed (threshold {threshold})")]
    TooManyFailures {
        level: u32,
        failed: usize,
        attempted: usize,
        threshold: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors raised while integrating a path, as opposed to bad input.
    pub fn is_simulation_failure(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteCoefficient { .. }
                | Error::NonFiniteState { .. }
                | Error::ZeroProgress { .. }
                | Error::TooManyFailures { .. }
        )
    }
}
