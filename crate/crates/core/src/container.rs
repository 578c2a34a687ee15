//! Framing shared by dataset archives and parameter checkpoints:
//!
//! ```text
//! magic (4 bytes) | version u32 LE | manifest length u64 LE | manifest (UTF-8 JSON) | payload
//! ```
//!
//! The payload is a concatenation of records; offsets stored in manifests are
//! relative to the first payload byte. Each record ends with the CRC32 of its
//! preceding bytes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("truncated {what}: need {needed} bytes, have {available}")]
    Truncated { what: String, needed: u64, available: u64 },
    #[error("manifest is not valid JSON: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("manifest is not valid UTF-8")]
    ManifestEncoding,
}

pub const HEADER_LEN: usize = 16;

pub fn encode(magic: [u8; 4], version: u32, manifest: &[u8], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + payload.len());
    out.extend_from_slice(&magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(manifest);
    out.extend_from_slice(payload);
    out
}

/// Splits a container into `(manifest_json, payload)` after checking the header.
pub fn decode(bytes: &[u8], magic: [u8; 4], version: u32) -> Result<(&str, &[u8]), ContainerError> {
    if bytes.len() < 4 || bytes[..4] != magic {
        return Err(ContainerError::BadMagic { expected: magic, found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < HEADER_LEN {
        return Err(ContainerError::Truncated {
            what: "header".into(),
            needed: HEADER_LEN as u64,
            available: bytes.len() as u64,
        });
    }
    let found = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if found != version {
        return Err(ContainerError::UnsupportedVersion { found, supported: version });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let available = (bytes.len() - HEADER_LEN) as u64;
    if len > available {
        return Err(ContainerError::Truncated { what: "manifest".into(), needed: len, available });
    }
    let end = HEADER_LEN + len as usize;
    let manifest = std::str::from_utf8(&bytes[HEADER_LEN..end]).map_err(|_| ContainerError::ManifestEncoding)?;
    Ok((manifest, &bytes[end..]))
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

/// Little-endian cursor over a record.
pub struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    pub fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub fn f32_vec(&mut self, n: usize) -> Option<Vec<f32>> {
        let raw = self.take(n.checked_mul(4)?)?;
        Some(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn f64_vec(&mut self, n: usize) -> Option<Vec<f64>> {
        let raw = self.take(n.checked_mul(8)?)?;
        Some(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    pub fn position(&self) -> usize {
        self.pos
    }
}
