use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("metric error: {0}")]
    Metric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training fault at step {step}: non-finite {term}")]
    NonFinite { step: usize, term: String },
    #[error("evaluation error: {0}")]
    Eval(String),
    #[error(transparent)]
    Model(#[from] fourcastx::ModelError),
    #[error(transparent)]
    Diff(#[from] atmos_diffops::DiffError),
    #[error(transparent)]
    Core(#[from] atmos_core::ConfigError),
    #[error(transparent)]
    Archive(#[from] atmos_core::dataset::ArchiveError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.display().to_string(), source }
}
