use thiserror::Error;

pub type Result<T, E = ConfigError> = std::result::Result<T, E>;

/// Invalid configuration or inputs that violate an operation's domain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unsupported wavelength {0} nm (expected 355 or 532)")]
    UnsupportedWavelength(u32),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("negative extinction {value} at level {level}")]
    NegativeExtinction { level: usize, value: f64 },
    #[error("{0}")]
    Other(String),
}

impl ConfigError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidParam { name, reason: reason.into() }
    }
}
