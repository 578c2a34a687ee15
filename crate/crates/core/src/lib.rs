//! Procedural atmosphere scenes, a single-scattering lidar forward model, and
//! the paired ATB/BC dataset pipeline built on top of them.
//!
//! The flow is `scenegen` → `lidar` → `dataset`: scenes are voxel volumes of
//! per-species backscatter and extinction, the forward model turns them into
//! attenuated and unattenuated backscatter, and the dataset stage regrids,
//! slices, masks and persists the result.

pub mod container;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod lidar;
pub mod rng;
pub mod scenegen;

pub use error::{ConfigError, Result};
pub use grid::{Field3, GridSpec, Wavelength};
pub use lidar::{simulate, simulate_zero_tau, two_way_transmittance, LidarConfig, SimulatedPair};
pub use scenegen::{generate_scene, molecular_profile, scene_catalog, SceneDescriptor, SceneParams, Volume3D};
