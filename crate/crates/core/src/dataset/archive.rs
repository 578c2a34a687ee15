use std::path::Path;

use thiserror::Error;

use super::{Dataset, DatasetManifest, SlicePair};
use crate::container::{self, ContainerError, Reader};
use crate::grid::Wavelength;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"ATMB";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("truncated payload for slice {position} ({scene_id} #{slice_index}): {detail}")]
    TruncatedSlice { position: usize, scene_id: String, slice_index: usize, detail: String },
    #[error("checksum mismatch for slice {position} ({scene_id} #{slice_index}, {wavelength}): stored {stored:08x}, computed {computed:08x}")]
    Checksum {
        position: usize,
        scene_id: String,
        slice_index: usize,
        wavelength: Wavelength,
        stored: u32,
        computed: u32,
    },
    #[error("inconsistent archive: {0}")]
    Inconsistent(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn encode_record(s: &SlicePair, out: &mut Vec<u8>) {
    let start = out.len();
    out.extend_from_slice(&(s.rows as u32).to_le_bytes());
    out.extend_from_slice(&(s.cols as u32).to_le_bytes());
    for field in [&s.atb, &s.bc, &s.t2] {
        for v in field.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&s.mask);
    let crc = container::crc32(&out[start..]);
    out.extend_from_slice(&crc.to_le_bytes());
}

fn check_shapes(dataset: &Dataset) -> Result<(), ArchiveError> {
    if dataset.manifest.slices.len() != dataset.slices.len() {
        return Err(ArchiveError::Inconsistent(format!(
            "manifest lists {} slices, dataset holds {}",
            dataset.manifest.slices.len(),
            dataset.slices.len()
        )));
    }
    for (i, s) in dataset.slices.iter().enumerate() {
        let n = s.rows * s.cols;
        if s.atb.len() != n || s.bc.len() != n || s.t2.len() != n || s.mask.len() != n {
            return Err(ArchiveError::Inconsistent(format!("slice {i} fields do not match shape {}x{}", s.rows, s.cols)));
        }
        if s.mask.iter().any(|&m| m > 1) {
            return Err(ArchiveError::Inconsistent(format!("slice {i} mask is not binary")));
        }
    }
    Ok(())
}

/// Serializes a dataset. Returns the bytes and the manifest as written
/// (record offsets and lengths filled in).
pub fn encode_archive(dataset: &Dataset) -> Result<(Vec<u8>, DatasetManifest), ArchiveError> {
    check_shapes(dataset)?;
    let mut manifest = dataset.manifest.clone();
    manifest.format_version = ARCHIVE_VERSION;
    let mut payload = Vec::new();
    for (entry, s) in manifest.slices.iter_mut().zip(&dataset.slices) {
        let start = payload.len();
        encode_record(s, &mut payload);
        entry.scene_id = s.scene_id.clone();
        entry.scene_index = s.scene_index;
        entry.slice_index = s.slice_index;
        entry.wavelength = s.wavelength;
        entry.rows = s.rows as u32;
        entry.cols = s.cols as u32;
        entry.offset = start as u64;
        entry.length = (payload.len() - start) as u64;
    }
    let json = serde_json::to_vec(&manifest).map_err(ContainerError::from)?;
    Ok((container::encode(ARCHIVE_MAGIC, ARCHIVE_VERSION, &json, &payload), manifest))
}

pub fn decode_archive(bytes: &[u8]) -> Result<Dataset, ArchiveError> {
    let (json, payload) = container::decode(bytes, ARCHIVE_MAGIC, ARCHIVE_VERSION)?;
    let manifest: DatasetManifest = serde_json::from_str(json).map_err(ContainerError::from)?;
    let mut slices = Vec::with_capacity(manifest.slices.len());
    for (position, e) in manifest.slices.iter().enumerate() {
        let truncated = |detail: String| ArchiveError::TruncatedSlice {
            position,
            scene_id: e.scene_id.clone(),
            slice_index: e.slice_index,
            detail,
        };
        let end = e.offset.checked_add(e.length).ok_or_else(|| truncated("offset overflow".into()))?;
        if end > payload.len() as u64 || e.length < 12 {
            return Err(truncated(format!("record spans {}..{} of {} payload bytes", e.offset, end, payload.len())));
        }
        let record = &payload[e.offset as usize..end as usize];
        let (body, tail) = record.split_at(record.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        let computed = container::crc32(body);
        if stored != computed {
            return Err(ArchiveError::Checksum {
                position,
                scene_id: e.scene_id.clone(),
                slice_index: e.slice_index,
                wavelength: e.wavelength,
                stored,
                computed,
            });
        }
        let mut r = Reader::new(body);
        let rows = r.u32().ok_or_else(|| truncated("shape".into()))? as usize;
        let cols = r.u32().ok_or_else(|| truncated("shape".into()))? as usize;
        if (rows as u32, cols as u32) != (e.rows, e.cols) {
            return Err(ArchiveError::Inconsistent(format!(
                "slice {position}: record shape {rows}x{cols} disagrees with manifest {}x{}",
                e.rows, e.cols
            )));
        }
        let n = rows * cols;
        let atb = r.f32_vec(n).ok_or_else(|| truncated("atb values".into()))?;
        let bc = r.f32_vec(n).ok_or_else(|| truncated("bc values".into()))?;
        let t2 = r.f32_vec(n).ok_or_else(|| truncated("t2 values".into()))?;
        let mask = r.take(n).ok_or_else(|| truncated("mask".into()))?.to_vec();
        if r.position() != body.len() {
            return Err(ArchiveError::Inconsistent(format!("slice {position}: {} trailing bytes", body.len() - r.position())));
        }
        slices.push(SlicePair {
            rows,
            cols,
            atb,
            bc,
            t2,
            mask,
            wavelength: e.wavelength,
            scene_id: e.scene_id.clone(),
            scene_index: e.scene_index,
            slice_index: e.slice_index,
            norm: manifest.norm,
        });
    }
    Ok(Dataset { manifest, slices })
}

pub fn write_archive(dataset: &Dataset, path: impl AsRef<Path>) -> Result<DatasetManifest, ArchiveError> {
    let (bytes, manifest) = encode_archive(dataset)?;
    std::fs::write(path, bytes)?;
    Ok(manifest)
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<Dataset, ArchiveError> {
    decode_archive(&std::fs::read(path)?)
}
