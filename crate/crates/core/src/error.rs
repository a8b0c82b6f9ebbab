use thiserror::Error;

/// Errors raised by the field, potential, dynamics and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: expected {expected}, found {found}")]
    GridMismatch { expected: String, found: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("frequency {omega} is outside the admissible set: {reason}")]
    InadmissibleFrequency { omega: f64, reason: String },

    #[error("no admissible amplitude for omega = {omega} (sigma = {sigma})")]
    NoAdmissibleAmplitude { omega: f64, sigma: f64 },

    #[error("degenerate dispersion value sigma = 0")]
    DegenerateSigma,

    #[error("root finding failed on bracket [{lo}, {hi}]: {reason}")]
    RootFinding { lo: f64, hi: f64, reason: String },

    #[error("non-finite value encountered at t = {time}: {what}")]
    NonFinite { time: f64, what: String },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
