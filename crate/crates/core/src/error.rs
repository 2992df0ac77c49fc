use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("insufficient support: {0}")]
    InsufficientSupport(String),

    #[error("time {t} outside the stored horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("path {path} diverged at step {step} (t = {t})")]
    PathDiverged { path: usize, step: usize, t: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error in `{key}`: {reason}")]
    Config { key: String, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::GridMismatch(_)
        )
    }
}
