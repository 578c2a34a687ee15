//! Single-scattering nadir lidar forward model.
//!
//! `atb = bc * t2` with `bc` the total backscatter and `t2` the two-way
//! transmittance from the top of the column down to each level. Setting all
//! extinction to zero makes `t2 == 1` and `atb == bc` bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::grid::{Field3, GridSpec, Wavelength};
use crate::scenegen::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub wavelength: Wavelength,
    /// Multiple-scattering factor in `(0, 1]`.
    pub eta: f64,
}

impl LidarConfig {
    pub const DEFAULT_ETA: f64 = 0.7;

    pub fn new(wavelength: Wavelength) -> Self {
        Self { wavelength, eta: Self::DEFAULT_ETA }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ConfigError::param("eta", format!("must lie in (0, 1], got {}", self.eta)));
        }
        Ok(())
    }
}

/// Attenuated and unattenuated backscatter for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPair {
    pub grid: GridSpec,
    pub wavelength: Wavelength,
    pub scene_id: String,
    pub seed: u64,
    pub atb: Field3,
    pub bc: Field3,
    pub t2: Field3,
}

/// Two-way transmittance for one column. `sigma_total` is ordered surface
/// first; the integral runs from the top level downward and excludes the
/// level's own layer, so the top level is exactly 1.
pub fn two_way_transmittance(sigma_total: &[f64], eta: f64, dz: f64) -> Result<Vec<f64>> {
    if !(dz > 0.0) {
        return Err(ConfigError::param("dz", format!("must be positive, got {dz}")));
    }
    if let Some((level, &value)) = sigma_total.iter().enumerate().find(|(_, s)| !(**s >= 0.0)) {
        return Err(ConfigError::NegativeExtinction { level, value });
    }
    let mut t2 = vec![0.0; sigma_total.len()];
    column_transmittance(sigma_total.iter().copied(), eta, dz, &mut t2);
    Ok(t2)
}

/// Writes `t2` for a column given extinction values listed surface first.
fn column_transmittance(sigma: impl DoubleEndedIterator<Item = f64> + ExactSizeIterator, eta: f64, dz: f64, out: &mut [f64]) {
    let mut tau_above = 0.0;
    for (k, s) in sigma.enumerate().rev() {
        out[k] = (-2.0 * eta * tau_above).exp();
        tau_above += s * dz;
    }
}

fn check_grid(volume: &Volume3D) -> Result<()> {
    volume.grid.validate()?;
    for f in volume.backscatter_fields().into_iter().chain(volume.extinction_fields()) {
        if !f.matches(&volume.grid) {
            return Err(ConfigError::GridMismatch(format!(
                "field dims {:?} do not match grid {}x{}x{}",
                f.dims(),
                volume.grid.n_lon,
                volume.grid.n_lat,
                volume.grid.n_alt
            )));
        }
    }
    Ok(())
}

fn total_backscatter(volume: &Volume3D) -> Field3 {
    volume
        .beta_mol
        .zip_with(&volume.beta_cloud, |a, b| a + b)
        .zip_with(&volume.beta_aer, |a, b| a + b)
}

pub fn simulate(volume: &Volume3D, cfg: &LidarConfig) -> Result<SimulatedPair> {
    cfg.validate()?;
    if volume.wavelength != cfg.wavelength {
        return Err(ConfigError::GridMismatch(format!(
            "volume simulated at {} but lidar configured for {}",
            volume.wavelength, cfg.wavelength
        )));
    }
    check_grid(volume)?;
    let grid = volume.grid;
    let bc = total_backscatter(volume);
    let sigma = volume
        .sigma_mol
        .zip_with(&volume.sigma_cloud, |a, b| a + b)
        .zip_with(&volume.sigma_aer, |a, b| a + b);
    if let Some(&bad) = sigma.data().iter().find(|s| !(**s >= 0.0)) {
        return Err(ConfigError::NegativeExtinction { level: 0, value: bad });
    }

    let dz = grid.dz();
    let mut t2 = Field3::zeros(&grid);
    let mut column = vec![0.0; grid.n_alt];
    for i in 0..grid.n_lon {
        for j in 0..grid.n_lat {
            column_transmittance((0..grid.n_alt).map(|k| sigma.get(i, j, k)), cfg.eta, dz, &mut column);
            for (k, &v) in column.iter().enumerate() {
                t2.set(i, j, k, v);
            }
        }
    }
    let atb = bc.zip_with(&t2, |b, t| b * t);
    Ok(SimulatedPair { grid, wavelength: volume.wavelength, scene_id: volume.scene_id.clone(), seed: volume.seed, atb, bc, t2 })
}

/// Unattenuated total backscatter, identical to `simulate(..).bc`.
pub fn simulate_zero_tau(volume: &Volume3D) -> Field3 {
    total_backscatter(volume)
}
