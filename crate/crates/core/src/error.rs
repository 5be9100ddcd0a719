use thiserror::Error;

/// Errors produced by the modelling, simulation and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("transfer function evaluated on a pole at s = {re} + {im}j")]
    Pole { re: f64, im: f64 },

    #[error("transfer function has a pole on the imaginary axis at {freq_hz} Hz")]
    PoleAtFrequency { freq_hz: f64 },

    #[error("THD undefined: fundamental magnitude is zero")]
    UndefinedThd,

    #[error("power factor undefined: apparent power is zero")]
    UndefinedPowerFactor,

    #[error("simulation failed at step {step} (t = {t} s): {reason}")]
    Simulation { step: usize, t: f64, reason: String },

    #[error("config line {line}, key `{key}`: {reason}")]
    Config {
        line: usize,
        key: String,
        reason: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
