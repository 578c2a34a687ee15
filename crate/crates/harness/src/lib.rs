//! Training, evaluation, metrics and the `atmos` command line on top of the
//! dataset pipeline and the restoration network.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod pgm;
pub mod report;
pub mod train;

pub use config::{ExperimentConfig, Preset};
pub use error::{HarnessError, Result};
pub use evaluate::{evaluate, EvalOptions, EvalReport};
pub use metrics::{compute_metrics, MetricRow};
pub use models::Models;
pub use train::{train, train_on, TrainSummary};
