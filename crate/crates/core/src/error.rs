use thiserror::Error;

/// Errors raised by model construction, inference and risk evaluation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("point {point} lies outside the window {window}")]
    PointOutsideWindow { point: f64, window: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("kernel/window mismatch: {0}")]
    DomainMismatch(String),

    #[error("intensity is not strictly positive at u = {at} (value {value}); KL divergence is infinite")]
    NonPositiveIntensity { at: f64, value: f64 },

    #[error("operation requires a proper prior (finite beta)")]
    ImproperPrior,

    #[error("no posterior draws supplied")]
    EmptyDraws,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
