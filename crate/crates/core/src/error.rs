use thiserror::Error;

use crate::tsio::TouchstoneError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate network at {freq_hz} Hz: {reason}")]
    DegenerateNetwork { freq_hz: f64, reason: String },

    #[error("incompatible networks: {0}")]
    IncompatibleNetworks(String),

    #[error("port {port} out of range for a {count}-port network")]
    InvalidPort { port: usize, count: usize },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("reflect standard ambiguous at {freq_hz} Hz: recovered phase is {phase_deg:.3} deg from nominal")]
    ReflectAmbiguity { freq_hz: f64, phase_deg: f64 },

    #[error(transparent)]
    Touchstone(#[from] TouchstoneError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
