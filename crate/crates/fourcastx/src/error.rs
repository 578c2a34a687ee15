use thiserror::Error;

use atmos_diffops::DiffError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("configuration error: {0}")]
    Config(String),
    /// A loss term or prediction produced NaN or infinity.
    #[error("non-finite {term} at element {index}: {detail}")]
    NonFinite { term: String, index: usize, detail: String },
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

impl From<ModelError> for DiffError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Diff(d) => d,
            other => DiffError::Config(other.to_string()),
        }
    }
}
