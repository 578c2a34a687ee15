//! Experiment configuration: one JSON document drives every subcommand.

use std::path::{Path, PathBuf};

use atmos_core::dataset::BuildConfig;
use atmos_core::rng::derive_key;
use fourcastx::{LossWeights, NetworkConfig};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Dataset archive read by `train` and `eval`, written by `build-dataset`.
    pub archive: PathBuf,
    pub run_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { archive: PathBuf::from("data/dataset.atmb"), run_dir: PathBuf::from("runs/default") }
    }
}

/// AdamW with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub disc_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { lr: 1e-4, disc_lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleConfig {
    /// Generator rate at the end of the cosine.
    pub lr_floor: f64,
    /// Critic rate multiplier applied once per epoch.
    pub disc_decay: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self { lr_floor: 1e-6, disc_decay: 0.98 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeedConfig {
    /// Batch order and gate noise.
    pub training: u64,
    /// Frozen perceptual extractor weights.
    pub hrf: u64,
}

impl Default for SeedConfig {
    fn default() -> Self {
        Self { training: 17, hrf: 29 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Full,
    Overfit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub paths: PathsConfig,
    /// Grids, scene parameters, lidar eta, normalisation and masking.
    pub data: BuildConfig,
    pub network: NetworkConfig,
    pub loss: LossWeights,
    pub optimizer: OptimizerConfig,
    pub schedule: ScheduleConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Checkpoint cadence in epochs; the last epoch is always saved.
    pub checkpoint_every: usize,
    /// Validation cadence in epochs.
    pub validate_every: usize,
    /// Slices in the fixed validation subset (from the test partition).
    pub validation_slices: usize,
    /// Train on only the first `n` training slices.
    pub train_slices: Option<usize>,
    /// Stop after this many optimisation steps.
    pub max_steps: Option<usize>,
    pub seeds: SeedConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Preset::Desk)
    }
}

impl ExperimentConfig {
    pub fn preset(p: Preset) -> Self {
        let desk = Self {
            paths: PathsConfig::default(),
            data: BuildConfig::desk(),
            network: NetworkConfig::desk(),
            loss: LossWeights::default(),
            optimizer: OptimizerConfig::default(),
            schedule: ScheduleConfig::default(),
            epochs: 20,
            batch_size: 3,
            checkpoint_every: 5,
            validate_every: 1,
            validation_slices: 8,
            train_slices: None,
            max_steps: None,
            seeds: SeedConfig::default(),
        };
        match p {
            Preset::Desk => desk,
            Preset::Full => Self { data: BuildConfig::full(), network: NetworkConfig::full(), ..desk },
            // Memorise 8 slices of one scene within `OVERFIT_STEPS`.
            Preset::Overfit => Self {
                data: BuildConfig { n_scenes: 1, ..BuildConfig::desk() },
                epochs: OVERFIT_STEPS.div_ceil(3),
                checkpoint_every: usize::MAX,
                validate_every: usize::MAX,
                train_slices: Some(8),
                max_steps: Some(OVERFIT_STEPS),
                ..desk
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(io_err(path))
    }

    /// Reseeds data, network, batch order and extractor from one value.
    pub fn apply_seed(&mut self, seed: u64) {
        self.data.seed = seed;
        self.network.seed = derive_key(&[seed, 1]);
        self.seeds.training = derive_key(&[seed, 2]);
        self.seeds.hrf = derive_key(&[seed, 3]);
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.network.validate()?;
        self.loss.validate()?;
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.disc_lr > 0.0 && o.eps > 0.0 && o.weight_decay >= 0.0) {
            return bad("learning rates and eps must be positive, weight decay non-negative");
        }
        if !((0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2)) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.schedule.lr_floor >= 0.0 && self.schedule.lr_floor <= o.lr) {
            return bad("lr_floor must lie in [0, lr]");
        }
        if !(self.schedule.disc_decay > 0.0 && self.schedule.disc_decay <= 1.0) {
            return bad("disc_decay must lie in (0, 1]");
        }
        if self.batch_size == 0 || self.checkpoint_every == 0 || self.validate_every == 0 {
            return bad("batch_size, checkpoint_every and validate_every must be at least 1");
        }
        Ok(())
    }
}

/// Step budget of the overfit preset.
pub const OVERFIT_STEPS: usize = 150;
