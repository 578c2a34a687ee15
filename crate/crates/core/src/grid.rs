use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};

/// Meters per degree on a spherical Earth; used to place grid origins in a
/// local flat frame.
pub const METERS_PER_DEGREE: f64 = 111_195.0;

/// Lidar wavelengths supported by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Wavelength {
    Nm355,
    Nm532,
}

impl Wavelength {
    pub const ALL: [Wavelength; 2] = [Wavelength::Nm355, Wavelength::Nm532];

    pub fn nm(self) -> u32 {
        match self {
            Wavelength::Nm355 => 355,
            Wavelength::Nm532 => 532,
        }
    }

    pub fn nm_f64(self) -> f64 {
        self.nm() as f64
    }
}

impl TryFrom<u32> for Wavelength {
    type Error = ConfigError;

    fn try_from(nm: u32) -> Result<Self> {
        match nm {
            355 => Ok(Wavelength::Nm355),
            532 => Ok(Wavelength::Nm532),
            other => Err(ConfigError::UnsupportedWavelength(other)),
        }
    }
}

impl From<Wavelength> for u32 {
    fn from(w: Wavelength) -> u32 {
        w.nm()
    }
}

impl std::fmt::Display for Wavelength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} nm", self.nm())
    }
}

/// Regular (lon, lat, alt) voxel grid. Level `k` sits at altitude `k * dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_lon: usize,
    pub n_lat: usize,
    pub n_alt: usize,
    /// Horizontal spacing in meters.
    pub d_horiz: f64,
    /// Top of the column in meters.
    pub alt_top: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
}

impl GridSpec {
    /// Satellite-aligned grid: 5 km spacing, 200 levels up to 20 km, 600 x 600 columns.
    pub fn full_scale() -> Self {
        Self {
            n_lon: 600,
            n_lat: 600,
            n_alt: 200,
            d_horiz: 5000.0,
            alt_top: 20_000.0,
            origin_lon: 104.5,
            origin_lat: 4.9,
        }
    }

    /// Coarse model grid feeding the full-scale target (18 km, 44 levels).
    pub fn full_scale_model() -> Self {
        Self {
            n_lon: 168,
            n_lat: 168,
            n_alt: 44,
            d_horiz: 18_000.0,
            alt_top: 20_000.0,
            origin_lon: 104.5,
            origin_lat: 4.9,
        }
    }

    /// Desk-scale target grid producing 64 x 64 slices.
    pub fn desk() -> Self {
        Self {
            n_lon: 8,
            n_lat: 64,
            n_alt: 64,
            d_horiz: 5000.0,
            alt_top: 20_000.0,
            origin_lon: 104.5,
            origin_lat: 4.9,
        }
    }

    /// Desk-scale model grid covering the desk target domain.
    pub fn desk_model() -> Self {
        Self {
            n_lon: 4,
            n_lat: 20,
            n_alt: 44,
            d_horiz: 18_000.0,
            alt_top: 20_000.0,
            origin_lon: 104.5,
            origin_lat: 4.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_lon == 0 || self.n_lat == 0 || self.n_alt == 0 {
            return Err(ConfigError::InvalidGrid(format!(
                "zero-sized grid {}x{}x{}",
                self.n_lon, self.n_lat, self.n_alt
            )));
        }
        if self.n_alt < 2 {
            return Err(ConfigError::InvalidGrid("need at least 2 vertical levels".into()));
        }
        if !(self.alt_top > 0.0 && self.alt_top.is_finite()) {
            return Err(ConfigError::InvalidGrid(format!("alt_top must be positive, got {}", self.alt_top)));
        }
        if !(self.d_horiz > 0.0 && self.d_horiz.is_finite()) {
            return Err(ConfigError::InvalidGrid(format!("d_horiz must be positive, got {}", self.d_horiz)));
        }
        Ok(())
    }

    #[inline]
    pub fn dz(&self) -> f64 {
        self.alt_top / self.n_alt as f64
    }

    #[inline]
    pub fn level_altitude(&self, k: usize) -> f64 {
        k as f64 * self.dz()
    }

    pub fn n_voxels(&self) -> usize {
        self.n_lon * self.n_lat * self.n_alt
    }

    /// Local-frame x coordinate (meters) of longitude index `i`.
    pub fn x_of(&self, i: usize) -> f64 {
        self.origin_lon * METERS_PER_DEGREE + i as f64 * self.d_horiz
    }

    /// Local-frame y coordinate (meters) of latitude index `j`.
    pub fn y_of(&self, j: usize) -> f64 {
        self.origin_lat * METERS_PER_DEGREE + j as f64 * self.d_horiz
    }

    /// Physical extent `(x0, x1, y0, y1, z0, z1)` spanned by the grid nodes.
    pub fn extent(&self) -> (f64, f64, f64, f64, f64, f64) {
        (
            self.x_of(0),
            self.x_of(self.n_lon - 1),
            self.y_of(0),
            self.y_of(self.n_lat - 1),
            0.0,
            self.level_altitude(self.n_alt - 1),
        )
    }
}

/// Dense scalar field on a [`GridSpec`].
///
/// Storage is longitude-major, then altitude, then latitude, so the
/// meridional plane at a fixed longitude is one contiguous altitude-major
/// block of `n_alt * n_lat` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3 {
    n_lon: usize,
    n_lat: usize,
    n_alt: usize,
    data: Vec<f64>,
}

impl Field3 {
    pub fn zeros(grid: &GridSpec) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: &GridSpec, value: f64) -> Self {
        Self {
            n_lon: grid.n_lon,
            n_lat: grid.n_lat,
            n_alt: grid.n_alt,
            data: vec![value; grid.n_voxels()],
        }
    }

    pub fn from_vec(grid: &GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.n_voxels() {
            return Err(ConfigError::GridMismatch(format!(
                "field has {} values, grid needs {}",
                data.len(),
                grid.n_voxels()
            )));
        }
        Ok(Self { n_lon: grid.n_lon, n_lat: grid.n_lat, n_alt: grid.n_alt, data })
    }

    /// `(n_lon, n_lat, n_alt)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_lon, self.n_lat, self.n_alt)
    }

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.dims() == (grid.n_lon, grid.n_lat, grid.n_alt)
    }

    #[inline]
    pub fn index(&self, i_lon: usize, j_lat: usize, k_alt: usize) -> usize {
        (i_lon * self.n_alt + k_alt) * self.n_lat + j_lat
    }

    #[inline]
    pub fn get(&self, i_lon: usize, j_lat: usize, k_alt: usize) -> f64 {
        self.data[self.index(i_lon, j_lat, k_alt)]
    }

    #[inline]
    pub fn set(&mut self, i_lon: usize, j_lat: usize, k_alt: usize, v: f64) {
        let idx = self.index(i_lon, j_lat, k_alt);
        self.data[idx] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Contiguous altitude-major plane at longitude index `i_lon`.
    pub fn meridional_plane(&self, i_lon: usize) -> &[f64] {
        let n = self.n_alt * self.n_lat;
        &self.data[i_lon * n..(i_lon + 1) * n]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Elementwise combination of two equally shaped fields.
    pub fn zip_with(&self, other: &Field3, f: impl Fn(f64, f64) -> f64) -> Field3 {
        assert_eq!(self.dims(), other.dims(), "field shape mismatch");
        Field3 {
            n_lon: self.n_lon,
            n_lat: self.n_lat,
            n_alt: self.n_alt,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field3 {
        Field3 { n_lon: self.n_lon, n_lat: self.n_lat, n_alt: self.n_alt, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_spacing() {
        let g = GridSpec::full_scale();
        g.validate().unwrap();
        assert_eq!(g.dz(), 100.0);
        assert_eq!(g.level_altitude(80), 8000.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        let mut g = GridSpec::desk();
        g.n_lat = 0;
        assert!(matches!(g.validate(), Err(ConfigError::InvalidGrid(_))));
        let mut g = GridSpec::desk();
        g.n_alt = 1;
        assert!(g.validate().is_err());
        let mut g = GridSpec::desk();
        g.alt_top = 0.0;
        assert!(g.validate().is_err());
    }

    #[test]
    fn wavelength_parsing() {
        assert_eq!(Wavelength::try_from(355).unwrap(), Wavelength::Nm355);
        assert_eq!(Wavelength::try_from(1064), Err(ConfigError::UnsupportedWavelength(1064)));
        let w: Wavelength = serde_json::from_str("532").unwrap();
        assert_eq!(w, Wavelength::Nm532);
        assert!(serde_json::from_str::<Wavelength>("600").is_err());
    }

    #[test]
    fn plane_layout_is_altitude_major() {
        let g = GridSpec { n_lon: 2, n_lat: 3, n_alt: 4, ..GridSpec::desk() };
        let mut f = Field3::zeros(&g);
        f.set(1, 2, 3, 5.0);
        let plane = f.meridional_plane(1);
        assert_eq!(plane[3 * 3 + 2], 5.0);
    }
}
