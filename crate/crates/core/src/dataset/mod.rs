//! Regridding, meridional slicing, normalization, masking, splitting and the
//! bit-exact `ATMB` archive.

mod archive;
mod build;
mod mask;
mod norm;
mod regrid;
mod slice;
mod split;

use serde::{Deserialize, Serialize};

use crate::grid::Wavelength;

pub use archive::{decode_archive, encode_archive, read_archive, write_archive, ArchiveError, ARCHIVE_MAGIC, ARCHIVE_VERSION};
pub use build::{build_dataset, paired_image_count, simulate_descriptor, BuildConfig};
pub use mask::{physics_mask, random_mask, MaskPreset};
pub use norm::{denormalize, normalize, NormSpec};
pub use regrid::regrid;
pub use slice::{assemble_meridional, slice_meridional};
pub use split::split_dataset;

/// One paired altitude x track record. Row `r` is altitude level `r`
/// (surface first); values are stored at archive precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicePair {
    pub rows: usize,
    pub cols: usize,
    pub atb: Vec<f32>,
    pub bc: Vec<f32>,
    pub t2: Vec<f32>,
    /// 1 = unknown / to restore.
    pub mask: Vec<u8>,
    pub wavelength: Wavelength,
    pub scene_id: String,
    pub scene_index: usize,
    pub slice_index: usize,
    pub norm: NormSpec,
}

impl SlicePair {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn masked_fraction(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.iter().filter(|&&m| m == 1).count() as f64 / self.mask.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceEntry {
    pub scene_id: String,
    pub scene_index: usize,
    pub slice_index: usize,
    pub wavelength: Wavelength,
    pub rows: u32,
    pub cols: u32,
    /// Byte offset of the record relative to the start of the payload section.
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub creation_seed: u64,
    pub norm: NormSpec,
    pub slices: Vec<SliceEntry>,
    /// Positions in `slices` assigned to the training partition.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Partition {
    Train,
    Test,
}

/// Archive contents held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub slices: Vec<SlicePair>,
}

impl Dataset {
    pub fn new(slices: Vec<SlicePair>, norm: NormSpec, creation_seed: u64) -> Self {
        let entries = slices
            .iter()
            .map(|s| SliceEntry {
                scene_id: s.scene_id.clone(),
                scene_index: s.scene_index,
                slice_index: s.slice_index,
                wavelength: s.wavelength,
                rows: s.rows as u32,
                cols: s.cols as u32,
                offset: 0,
                length: 0,
            })
            .collect();
        let manifest = DatasetManifest {
            format_version: ARCHIVE_VERSION,
            creation_seed,
            norm,
            slices: entries,
            train: Vec::new(),
            test: Vec::new(),
        };
        Self { manifest, slices }
    }

    pub fn partition(&self, which: Partition) -> Vec<&SlicePair> {
        let idx = match which {
            Partition::Train => &self.manifest.train,
            Partition::Test => &self.manifest.test,
        };
        idx.iter().map(|&i| &self.slices[i]).collect()
    }
}
