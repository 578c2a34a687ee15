//! Binary 16-bit portable graymaps (P5, big-endian, maxval 65535).

use std::path::Path;

use crate::error::{io_err, HarnessError, Result};

pub const PGM_MAX: u16 = 65535;

/// Encodes `data` (row-major, `rows x cols`, row 0 = surface) so the top of
/// the column is the top of the picture. Values are mapped linearly from
/// `[lo, hi]` to `[0, 65535]` and clamped.
pub fn encode_pgm(rows: usize, cols: usize, data: &[f64], lo: f64, hi: f64) -> Result<Vec<u8>> {
    if data.len() != rows * cols {
        return Err(HarnessError::Eval(format!("{} values for a {rows}x{cols} image", data.len())));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{cols} {rows}\n{PGM_MAX}\n").into_bytes();
    for r in (0..rows).rev() {
        for &v in &data[r * cols..(r + 1) * cols] {
            let q = ((v - lo) / span).clamp(0.0, 1.0) * PGM_MAX as f64;
            let q = if q.is_nan() { 0 } else { q.round() as u16 };
            out.extend_from_slice(&q.to_be_bytes());
        }
    }
    Ok(out)
}

/// Inverse of [`encode_pgm`] up to quantisation: samples in `[0, 1]`, row 0 = surface.
pub fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |m: &str| HarnessError::Eval(format!("not a 16-bit P5 graymap: {m}"));
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header"))?.to_string());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != PGM_MAX.to_string() {
        return Err(bad("magic or maxval"));
    }
    let cols: usize = fields[1].parse().map_err(|_| bad("width"))?;
    let rows: usize = fields[2].parse().map_err(|_| bad("height"))?;
    let body = bytes.get(pos..).ok_or_else(|| bad("missing body"))?;
    if body.len() != rows * cols * 2 {
        return Err(bad("body length"));
    }
    let mut data = vec![0.0; rows * cols];
    for (i, px) in body.chunks_exact(2).enumerate() {
        let (pr, c) = (i / cols, i % cols);
        data[(rows - 1 - pr) * cols + c] = u16::from_be_bytes([px[0], px[1]]) as f64 / PGM_MAX as f64;
    }
    Ok((rows, cols, data))
}

pub fn write_pgm(path: &Path, rows: usize, cols: usize, data: &[f64], lo: f64, hi: f64) -> Result<()> {
    std::fs::write(path, encode_pgm(rows, cols, data, lo, hi)?).map_err(io_err(path))
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    decode_pgm(&std::fs::read(path).map_err(io_err(path))?)
}

/// `(min, max)` of the finite values, `(0, 1)` when there are none.
pub fn value_range(data: &[f64]) -> (f64, f64) {
    let finite = data.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo <= hi {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_round_trip() {
        let data: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let bytes = encode_pgm(2, 3, &data, 0.0, 1.0).unwrap();
        assert!(bytes.starts_with(b"P5\n3 2\n65535\n"));
        assert_eq!(bytes.len(), 13 + 12);
        // First stored row is the top (row 1): value 0.6 -> 39321 big-endian.
        assert_eq!(&bytes[13..15], &39321u16.to_be_bytes());
        let (r, c, back) = decode_pgm(&bytes).unwrap();
        assert_eq!((r, c), (2, 3));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() <= 0.5 / 65535.0);
        }
    }
}
