//! Deterministic procedural atmospheres: an exponential molecular background
//! plus Gaussian-ellipsoid clouds and aerosol layers.

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::grid::{Field3, GridSpec, Wavelength};
use crate::rng::{derive_key, CounterRng};

/// Molecular backscatter at sea level for 532 nm, m^-1 sr^-1.
pub const BETA0_532: f64 = 1.39e-6;
/// Molecular scale height, meters.
pub const SCALE_HEIGHT: f64 = 8000.0;
/// Rayleigh extinction-to-backscatter ratio (8 pi / 3 sr).
pub const RAYLEIGH_LIDAR_RATIO: f64 = 8.0 * std::f64::consts::PI / 3.0;

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo < 0.0 || self.hi < self.lo {
            return Err(ConfigError::param(name, format!("need 0 <= lo <= hi, got [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    fn sample(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u
    }

    /// Log-uniform sample for strictly positive intervals, uniform otherwise.
    fn sample_log(&self, u: f64) -> f64 {
        if self.lo > 0.0 {
            (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * u).exp()
        } else {
            self.sample(u)
        }
    }
}

/// Geometry of one family of ellipsoidal structures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureGeometry {
    /// Center altitude range, meters.
    pub center_alt: Interval,
    /// Horizontal 1-sigma extent range, meters.
    pub horiz_extent: Interval,
    /// Vertical 1-sigma extent range, meters.
    pub vert_extent: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub n_clouds: usize,
    pub n_aerosol_layers: usize,
    /// Peak cloud backscatter, m^-1 sr^-1 (sampled log-uniformly).
    pub cloud_beta_range: Interval,
    /// Peak aerosol backscatter at 532 nm, m^-1 sr^-1 (sampled log-uniformly).
    pub aerosol_beta_range: Interval,
    pub cloud_geometry: StructureGeometry,
    pub aerosol_geometry: StructureGeometry,
    pub lidar_ratio_cloud: f64,
    pub lidar_ratio_aer: f64,
    /// Backscatter Angstrom exponent of aerosols relative to 532 nm.
    pub aerosol_angstrom: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            n_clouds: 4,
            n_aerosol_layers: 2,
            cloud_beta_range: Interval::new(2e-6, 1e-4),
            aerosol_beta_range: Interval::new(2e-7, 3e-6),
            cloud_geometry: StructureGeometry {
                center_alt: Interval::new(1500.0, 13_000.0),
                horiz_extent: Interval::new(15_000.0, 80_000.0),
                vert_extent: Interval::new(300.0, 1500.0),
            },
            aerosol_geometry: StructureGeometry {
                center_alt: Interval::new(300.0, 4000.0),
                horiz_extent: Interval::new(80_000.0, 400_000.0),
                vert_extent: Interval::new(400.0, 1500.0),
            },
            lidar_ratio_cloud: 18.0,
            lidar_ratio_aer: 50.0,
            aerosol_angstrom: 1.0,
        }
    }
}

impl SceneParams {
    pub fn empty() -> Self {
        Self { n_clouds: 0, n_aerosol_layers: 0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.cloud_beta_range.validate("cloud_beta_range")?;
        self.aerosol_beta_range.validate("aerosol_beta_range")?;
        for (name, g) in [("cloud_geometry", &self.cloud_geometry), ("aerosol_geometry", &self.aerosol_geometry)] {
            g.center_alt.validate(name)?;
            g.horiz_extent.validate(name)?;
            g.vert_extent.validate(name)?;
            if g.horiz_extent.lo <= 0.0 || g.vert_extent.lo <= 0.0 {
                return Err(ConfigError::param(name, "extents must be strictly positive"));
            }
        }
        for (name, s) in [("lidar_ratio_cloud", self.lidar_ratio_cloud), ("lidar_ratio_aer", self.lidar_ratio_aer)] {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(ConfigError::param(name, format!("must be non-negative, got {s}")));
            }
        }
        if !self.aerosol_angstrom.is_finite() {
            return Err(ConfigError::param("aerosol_angstrom", "must be finite"));
        }
        Ok(())
    }
}

/// Per-species backscatter and extinction volumes for one scene at one wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    pub grid: GridSpec,
    pub wavelength: Wavelength,
    pub beta_mol: Field3,
    pub beta_cloud: Field3,
    pub beta_aer: Field3,
    pub sigma_mol: Field3,
    pub sigma_cloud: Field3,
    pub sigma_aer: Field3,
    pub scene_id: String,
    pub seed: u64,
}

impl Volume3D {
    pub fn backscatter_fields(&self) -> [&Field3; 3] {
        [&self.beta_mol, &self.beta_cloud, &self.beta_aer]
    }

    pub fn extinction_fields(&self) -> [&Field3; 3] {
        [&self.sigma_mol, &self.sigma_cloud, &self.sigma_aer]
    }

    /// Copy with every extinction field forced to zero.
    pub fn without_extinction(&self) -> Volume3D {
        let mut v = self.clone();
        v.sigma_mol = Field3::zeros(&self.grid);
        v.sigma_cloud = Field3::zeros(&self.grid);
        v.sigma_aer = Field3::zeros(&self.grid);
        v
    }
}

/// Sea-level molecular backscatter at `wavelength` (lambda^-4 scaling from 532 nm).
pub fn molecular_beta0(wavelength: Wavelength) -> f64 {
    BETA0_532 * (532.0 / wavelength.nm_f64()).powi(4)
}

/// Molecular `(beta, sigma)` per level, surface first.
pub fn molecular_profile(wavelength: Wavelength, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    grid.validate()?;
    let beta0 = molecular_beta0(wavelength);
    let beta: Vec<f64> = (0..grid.n_alt)
        .map(|k| beta0 * (-grid.level_altitude(k) / SCALE_HEIGHT).exp())
        .collect();
    let sigma = beta.iter().map(|b| RAYLEIGH_LIDAR_RATIO * b).collect();
    Ok((beta, sigma))
}

/// Stable identifier of the atmosphere generated from `seed`.
pub fn scene_id_for(seed: u64) -> String {
    format!("scene-{seed:016x}")
}

#[derive(Debug, Clone, Copy)]
struct Ellipsoid {
    x: f64,
    y: f64,
    z: f64,
    sx: f64,
    sy: f64,
    sz: f64,
    amplitude: f64,
}

const DRAWS_PER_STRUCTURE: u64 = 8;
const SCENE_STREAM: u64 = 0x5343_454E_4531;

fn draw_ellipsoid(
    rng: &CounterRng,
    index: u64,
    grid: &GridSpec,
    geom: &StructureGeometry,
    amplitude: &Interval,
) -> Ellipsoid {
    let base = index * DRAWS_PER_STRUCTURE;
    let (x0, x1, y0, y1, _, _) = grid.extent();
    Ellipsoid {
        x: rng.uniform_range_at(base, x0, x1),
        y: rng.uniform_range_at(base + 1, y0, y1),
        z: geom.center_alt.sample(rng.uniform_at(base + 2)),
        sx: geom.horiz_extent.sample(rng.uniform_at(base + 3)),
        sy: geom.horiz_extent.sample(rng.uniform_at(base + 4)),
        sz: geom.vert_extent.sample(rng.uniform_at(base + 5)),
        amplitude: amplitude.sample_log(rng.uniform_at(base + 6)),
    }
}

/// Exponent cutoff beyond which an ellipsoid contributes exactly zero.
const TAIL_CUTOFF: f64 = 50.0;

fn splat(field: &mut Field3, grid: &GridSpec, e: &Ellipsoid, scale: f64) {
    for i in 0..grid.n_lon {
        let dx = (grid.x_of(i) - e.x) / e.sx;
        for k in 0..grid.n_alt {
            let dz = (grid.level_altitude(k) - e.z) / e.sz;
            for j in 0..grid.n_lat {
                let dy = (grid.y_of(j) - e.y) / e.sy;
                let q = 0.5 * (dx * dx + dy * dy + dz * dz);
                if q < TAIL_CUTOFF {
                    let idx = field.index(i, j, k);
                    field.data_mut()[idx] += scale * e.amplitude * (-q).exp();
                }
            }
        }
    }
}

/// Build one scene. A pure function of its arguments: the geometry depends
/// only on `seed`, so the two wavelengths of a scene see the same atmosphere.
pub fn generate_scene(seed: u64, grid: &GridSpec, params: &SceneParams, wavelength: Wavelength) -> Result<Volume3D> {
    grid.validate()?;
    params.validate()?;
    let scene_id = scene_id_for(seed);
    let root = CounterRng::keyed(&[seed, SCENE_STREAM]);
    let cloud_rng = root.fork(1);
    let aer_rng = root.fork(2);

    let (mol_beta, _) = molecular_profile(wavelength, grid)?;
    let mut beta_mol = Field3::zeros(grid);
    for i in 0..grid.n_lon {
        for k in 0..grid.n_alt {
            for j in 0..grid.n_lat {
                beta_mol.set(i, j, k, mol_beta[k]);
            }
        }
    }

    let mut beta_cloud = Field3::zeros(grid);
    for c in 0..params.n_clouds as u64 {
        let e = draw_ellipsoid(&cloud_rng, c, grid, &params.cloud_geometry, &params.cloud_beta_range);
        splat(&mut beta_cloud, grid, &e, 1.0);
    }

    let mut beta_aer = Field3::zeros(grid);
    let aer_scale = (532.0 / wavelength.nm_f64()).powf(params.aerosol_angstrom);
    for a in 0..params.n_aerosol_layers as u64 {
        let e = draw_ellipsoid(&aer_rng, a, grid, &params.aerosol_geometry, &params.aerosol_beta_range);
        splat(&mut beta_aer, grid, &e, aer_scale);
    }

    let sigma_mol = beta_mol.map(|b| RAYLEIGH_LIDAR_RATIO * b);
    let sigma_cloud = beta_cloud.map(|b| params.lidar_ratio_cloud * b);
    let sigma_aer = beta_aer.map(|b| params.lidar_ratio_aer * b);

    Ok(Volume3D {
        grid: *grid,
        wavelength,
        beta_mol,
        beta_cloud,
        beta_aer,
        sigma_mol,
        sigma_cloud,
        sigma_aer,
        scene_id,
        seed,
    })
}

/// One entry of the scene catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub scene_index: usize,
    pub seed: u64,
    pub wavelength: Wavelength,
}

/// Scenes ordered by `(scene_index, wavelength)`; both wavelengths of a scene
/// share its seed.
pub fn scene_catalog(n_scenes: usize, base_seed: u64) -> Result<Vec<SceneDescriptor>> {
    if n_scenes == 0 {
        return Err(ConfigError::param("n_scenes", "must be at least 1"));
    }
    Ok((0..n_scenes)
        .flat_map(|i| {
            let seed = derive_key(&[base_seed, i as u64]);
            Wavelength::ALL.into_iter().map(move |wavelength| SceneDescriptor { scene_index: i, seed, wavelength })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_grid() -> GridSpec {
        GridSpec { n_lon: 5, n_lat: 12, n_alt: 30, ..GridSpec::desk_model() }
    }

    #[test]
    fn molecular_ratio_between_wavelengths() {
        let ratio = molecular_beta0(Wavelength::Nm355) / molecular_beta0(Wavelength::Nm532);
        let exact = (532.0f64 / 355.0).powi(4);
        assert!((ratio - exact).abs() < 1e-14 * exact);
        // Quoted values to their printed precision.
        assert!((ratio - 5.0444).abs() / 5.0444 < 5e-4, "{ratio}");
        assert!((molecular_beta0(Wavelength::Nm355) - 7.012e-6).abs() / 7.012e-6 < 5e-4);
    }

    #[test]
    fn scale_height_identity() {
        let g = GridSpec::full_scale();
        let (beta, sigma) = molecular_profile(Wavelength::Nm532, &g).unwrap();
        let rel = (beta[80] - BETA0_532 / std::f64::consts::E).abs() / beta[80];
        assert!(rel < 1e-14);
        assert!(beta.windows(2).all(|w| w[1] < w[0]));
        assert!(sigma.iter().zip(&beta).all(|(s, b)| *s == RAYLEIGH_LIDAR_RATIO * b));
    }

    #[test]
    fn full_profile_matches_direct_evaluation() {
        let g = GridSpec::full_scale();
        let (beta, _) = molecular_profile(Wavelength::Nm532, &g).unwrap();
        assert_eq!(beta.len(), 200);
        for (k, b) in beta.iter().enumerate() {
            let z = 100.0 * k as f64;
            let direct = 1.39e-6 * f64::exp(-z / 8000.0);
            assert!((b - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn empty_scene_is_pure_molecular() {
        let g = small_grid();
        let v = generate_scene(9, &g, &SceneParams::empty(), Wavelength::Nm532).unwrap();
        assert!(v.beta_cloud.data().iter().all(|&x| x == 0.0));
        assert!(v.sigma_cloud.data().iter().all(|&x| x == 0.0));
        assert!(v.beta_aer.data().iter().all(|&x| x == 0.0));
        let (beta, _) = molecular_profile(Wavelength::Nm532, &g).unwrap();
        for i in 0..g.n_lon {
            for j in 0..g.n_lat {
                for k in 0..g.n_alt {
                    assert_eq!(v.beta_mol.get(i, j, k), beta[k]);
                }
            }
        }
    }

    #[test]
    fn generation_is_bitwise_deterministic() {
        let g = small_grid();
        let p = SceneParams { n_clouds: 6, ..SceneParams::default() };
        let a = generate_scene(77, &g, &p, Wavelength::Nm355).unwrap();
        let b = generate_scene(77, &g, &p, Wavelength::Nm355).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(78, &g, &p, Wavelength::Nm355).unwrap();
        assert_ne!(a.beta_cloud, c.beta_cloud);
    }

    #[test]
    fn exhaustive_scan_non_negative_and_lidar_ratio() {
        let g = small_grid();
        let p = SceneParams { n_clouds: 8, n_aerosol_layers: 3, ..SceneParams::default() };
        for seed in 0..5 {
            let v = generate_scene(seed, &g, &p, Wavelength::Nm532).unwrap();
            for f in v.backscatter_fields().into_iter().chain(v.extinction_fields()) {
                assert!(f.min() >= 0.0 && f.all_finite());
            }
            for (s, b) in v.sigma_cloud.data().iter().zip(v.beta_cloud.data()) {
                assert_eq!(*s, 18.0 * b);
            }
            for (s, b) in v.sigma_aer.data().iter().zip(v.beta_aer.data()) {
                assert_eq!(*s, 50.0 * b);
            }
            assert!(v.beta_cloud.max() > 0.0);
        }
    }

    #[test]
    fn rayleigh_scaling_voxelwise() {
        let g = small_grid();
        let p = SceneParams::default();
        let a = generate_scene(3, &g, &p, Wavelength::Nm355).unwrap();
        let b = generate_scene(3, &g, &p, Wavelength::Nm532).unwrap();
        let f = (532.0f64 / 355.0).powi(4);
        for (x, y) in a.beta_mol.data().iter().zip(b.beta_mol.data()) {
            assert!((x - y * f).abs() <= 1e-12 * x);
        }
        // Clouds are wavelength-neutral.
        assert_eq!(a.beta_cloud, b.beta_cloud);
    }

    #[test]
    fn zero_sized_grid_is_rejected() {
        let g = GridSpec { n_lon: 0, ..small_grid() };
        assert!(matches!(
            generate_scene(1, &g, &SceneParams::default(), Wavelength::Nm532),
            Err(ConfigError::InvalidGrid(_))
        ));
    }

    #[test]
    fn catalog_counts_and_uniqueness() {
        assert_eq!(scene_catalog(384, 0).unwrap().len(), 768);
        let one = scene_catalog(1, 5).unwrap();
        assert_eq!(one.iter().map(|d| d.wavelength.nm()).collect::<Vec<_>>(), vec![355, 532]);
        let five = scene_catalog(5, 5).unwrap();
        assert_eq!(five.len(), 10);
        let descs: HashSet<_> = five.iter().collect();
        assert_eq!(descs.len(), 10);
        let seeds: HashSet<_> = five.iter().map(|d| d.seed).collect();
        assert_eq!(seeds.len(), 5);
        assert!(five.windows(2).all(|w| (w[0].scene_index, w[0].wavelength) < (w[1].scene_index, w[1].wavelength)));
        assert_eq!(scene_catalog(5, 5).unwrap(), five);
        assert!(scene_catalog(0, 5).is_err());
    }
}
