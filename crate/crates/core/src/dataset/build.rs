use serde::{Deserialize, Serialize};

use super::{physics_mask, random_mask, regrid, slice_meridional, split_dataset, Dataset, NormSpec, SlicePair};
use crate::error::{ConfigError, Result};
use crate::grid::GridSpec;
use crate::lidar::{simulate, LidarConfig, SimulatedPair};
use crate::rng::derive_key;
use crate::scenegen::{generate_scene, scene_catalog, SceneDescriptor, SceneParams};

/// Everything needed to go from seeds to a split archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub n_scenes: usize,
    pub seed: u64,
    pub model_grid: GridSpec,
    pub target_grid: GridSpec,
    pub scene: SceneParams,
    pub eta: f64,
    pub norm: NormSpec,
    /// Transmittance below which a pixel is flagged for restoration.
    pub mask_threshold: f64,
    /// Extra random rectangle coverage unioned with the physics mask.
    pub mask_coverage: f64,
    pub split_ratio: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl BuildConfig {
    pub fn desk() -> Self {
        Self {
            n_scenes: 4,
            seed: 2020,
            model_grid: GridSpec::desk_model(),
            target_grid: GridSpec::desk(),
            scene: SceneParams::default(),
            eta: LidarConfig::DEFAULT_ETA,
            norm: NormSpec::default(),
            mask_threshold: 0.7,
            mask_coverage: 0.15,
            split_ratio: 0.9,
        }
    }

    pub fn full() -> Self {
        Self {
            n_scenes: 384,
            model_grid: GridSpec::full_scale_model(),
            target_grid: GridSpec::full_scale(),
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(ConfigError::param("n_scenes", "must be at least 1"));
        }
        self.model_grid.validate()?;
        self.target_grid.validate()?;
        self.scene.validate()?;
        self.norm.validate()?;
        if !(0.0..=1.0).contains(&self.mask_coverage) {
            return Err(ConfigError::param("mask_coverage", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Number of slice records the build produces.
    pub fn slice_count(&self) -> usize {
        self.n_scenes * self.target_grid.n_lon * 2
    }
}

/// Images in a paired dataset: one per scene, slice, wavelength and signal type.
pub fn paired_image_count(n_scenes: u64, n_lon: u64, n_wavelengths: u64, n_signal_types: u64) -> u64 {
    n_scenes * n_lon * n_wavelengths * n_signal_types
}

/// Scene generation, forward simulation and regridding for one descriptor.
pub fn simulate_descriptor(cfg: &BuildConfig, d: &SceneDescriptor) -> Result<SimulatedPair> {
    let volume = generate_scene(d.seed, &cfg.model_grid, &cfg.scene, d.wavelength)?;
    let pair = simulate(&volume, &LidarConfig { wavelength: d.wavelength, eta: cfg.eta })?;
    regrid(&pair, &cfg.target_grid)
}

fn masked_slices(cfg: &BuildConfig, d: &SceneDescriptor, pair: &SimulatedPair) -> Result<Vec<SlicePair>> {
    let mut slices = slice_meridional(pair);
    for s in &mut slices {
        let physics = physics_mask(&s.t2, cfg.mask_threshold)?;
        let key = derive_key(&[d.seed, d.wavelength.nm() as u64, s.slice_index as u64]);
        let random = random_mask(key, s.rows, s.cols, cfg.mask_coverage)?;
        s.mask = physics.iter().zip(&random).map(|(a, b)| a | b).collect();
        s.scene_index = d.scene_index;
        s.norm = cfg.norm;
    }
    Ok(slices)
}

/// Full build: catalog → simulate → regrid → slice → mask → split.
pub fn build_dataset(cfg: &BuildConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut slices = Vec::with_capacity(cfg.slice_count());
    for d in scene_catalog(cfg.n_scenes, cfg.seed)? {
        let pair = simulate_descriptor(cfg, &d)?;
        slices.extend(masked_slices(cfg, &d, &pair)?);
    }
    let mut dataset = Dataset::new(slices, cfg.norm, cfg.seed);
    if cfg.n_scenes >= 2 {
        dataset.manifest = split_dataset(&dataset.manifest, cfg.split_ratio, cfg.seed)?;
    } else {
        dataset.manifest.train = (0..dataset.slices.len()).collect();
    }
    Ok(dataset)
}
