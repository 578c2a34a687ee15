//! Parameter checkpoints in the shared container framing with magic `ATMP`.
//! Each record is `u32 ndim | u32 dims... | values (LE, manifest dtype) | CRC32`.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use atmos_core::container::{self, Reader};

use crate::error::{DiffError, Result};
use crate::params::{InitRecord, Param, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"ATMP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitRecord,
    pub trainable: bool,
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub dtype: String,
    pub store_seed: u64,
    pub model_config: serde_json::Value,
    pub extra: serde_json::Value,
    pub params: Vec<ParamEntry>,
}

pub fn encode_checkpoint<T: Scalar>(store: &ParamStore<T>, model_config: serde_json::Value, extra: serde_json::Value) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut entries = Vec::with_capacity(store.len());
    for p in store.params() {
        let start = payload.len();
        payload.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &d in p.value.shape() {
            payload.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            v.write_le(&mut payload);
        }
        let crc = container::crc32(&payload[start..]);
        payload.extend_from_slice(&crc.to_le_bytes());
        entries.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            init: p.init.clone(),
            trainable: p.trainable,
            offset: start as u64,
            length: (payload.len() - start) as u64,
        });
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_VERSION,
        dtype: T::DTYPE.to_string(),
        store_seed: store.seed(),
        model_config,
        extra,
        params: entries,
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| DiffError::Checkpoint(e.to_string()))?;
    Ok(container::encode(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, &json, &payload))
}

pub fn decode_manifest(bytes: &[u8]) -> Result<(CheckpointManifest, &[u8])> {
    let (json, payload) = container::decode(bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let manifest: CheckpointManifest =
        serde_json::from_str(json).map_err(|e| DiffError::Checkpoint(format!("bad manifest: {e}")))?;
    Ok((manifest, payload))
}

/// Decodes every parameter, converting from the stored dtype to `T`.
pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<(ParamStore<T>, CheckpointManifest)> {
    let (manifest, payload) = decode_manifest(bytes)?;
    let width = match manifest.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(DiffError::Checkpoint(format!("unsupported dtype {other:?}"))),
    };
    let mut store = ParamStore::new(manifest.store_seed);
    for e in &manifest.params {
        let bad = |what: &str| DiffError::Checkpoint(format!("parameter {:?}: {what}", e.name));
        let end = e.offset.checked_add(e.length).ok_or_else(|| bad("offset overflow"))?;
        let rec = payload.get(e.offset as usize..end as usize).ok_or_else(|| bad("record out of range"))?;
        if rec.len() < 4 {
            return Err(bad("record truncated"));
        }
        let (body, crc) = rec.split_at(rec.len() - 4);
        if container::crc32(body) != u32::from_le_bytes(crc.try_into().unwrap()) {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader::new(body);
        let ndim = r.u32().ok_or_else(|| bad("record truncated"))? as usize;
        let shape: Vec<usize> = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Option<_>>().ok_or_else(|| bad("record truncated"))?;
        if shape != e.shape {
            return Err(bad("record shape disagrees with manifest"));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * width).ok_or_else(|| bad("record truncated"))?;
        let values: Vec<T> = match width {
            4 => raw.chunks_exact(4).map(|c| T::of(f32::read_le(c) as f64)).collect(),
            _ => raw.chunks_exact(8).map(|c| T::of(f64::read_le(c))).collect(),
        };
        store.insert(Param {
            name: e.name.clone(),
            value: Arc::new(Tensor::new(&shape, values)?),
            init: e.init.clone(),
            trainable: e.trainable,
        })?;
    }
    Ok((store, manifest))
}

/// Copies checkpoint values into an existing store whose parameter names and
/// shapes must match exactly.
pub fn load_into<T: Scalar>(store: &mut ParamStore<T>, bytes: &[u8]) -> Result<CheckpointManifest> {
    let (loaded, manifest) = decode_checkpoint::<T>(bytes)?;
    if loaded.len() != store.len() {
        return Err(DiffError::Checkpoint(format!("checkpoint has {} parameters, model has {}", loaded.len(), store.len())));
    }
    for p in loaded.params() {
        let id = store.id_of(&p.name).ok_or_else(|| DiffError::Checkpoint(format!("unknown parameter {:?}", p.name)))?;
        if store.value(id).shape() != p.value.shape() {
            return Err(DiffError::Checkpoint(format!(
                "parameter {:?}: checkpoint shape {:?}, model shape {:?}",
                p.name,
                p.value.shape(),
                store.value(id).shape()
            )));
        }
        store.set(id, (*p.value).clone())?;
        store.set_trainable(id, p.trainable);
    }
    Ok(manifest)
}

pub fn write_checkpoint<T: Scalar>(
    path: &Path,
    store: &ParamStore<T>,
    model_config: serde_json::Value,
    extra: serde_json::Value,
) -> Result<()> {
    std::fs::write(path, encode_checkpoint(store, model_config, extra)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<u8>> {
    Ok(std::fs::read(path)?)
}
