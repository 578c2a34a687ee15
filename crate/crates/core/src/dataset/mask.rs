use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};
use crate::rng::CounterRng;

/// Pixels whose two-way transmittance fell below `threshold` are marked 1.
/// The comparison happens at the storage precision of `t2`.
pub fn physics_mask(t2: &[f32], threshold: f64) -> Result<Vec<u8>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(ConfigError::param("mask_threshold", format!("must lie in (0, 1), got {threshold}")));
    }
    let threshold = threshold as f32;
    Ok(t2.iter().map(|&t| u8::from(t < threshold)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskPreset {
    Heavy,
    Light,
}

impl MaskPreset {
    pub fn coverage(self) -> f64 {
        match self {
            MaskPreset::Heavy => 0.5,
            MaskPreset::Light => 0.15,
        }
    }
}

const MAX_RECTANGLES: u64 = 100_000;

/// Union of random axis-aligned rectangles covering at least `coverage` of
/// the pixels. Rectangles are at most a quarter of each side, which bounds
/// the overshoot to one sixteenth of the image.
pub fn random_mask(seed: u64, rows: usize, cols: usize, coverage: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(ConfigError::param("coverage", format!("must lie in [0, 1], got {coverage}")));
    }
    let n = rows * cols;
    let mut mask = vec![0u8; n];
    if n == 0 || coverage == 0.0 {
        return Ok(mask);
    }
    let target = (coverage * n as f64).ceil() as usize;
    if target >= n {
        mask.fill(1);
        return Ok(mask);
    }
    let rng = CounterRng::keyed(&[seed, rows as u64, cols as u64]);
    let max_h = (rows / 4).max(1) as u64;
    let max_w = (cols / 4).max(1) as u64;
    let mut covered = 0usize;
    let mut draw = 0u64;
    while covered < target && draw < MAX_RECTANGLES {
        let base = draw * 4;
        let h = 1 + rng.below_at(base, max_h) as usize;
        let w = 1 + rng.below_at(base + 1, max_w) as usize;
        let r0 = rng.below_at(base + 2, (rows - h + 1) as u64) as usize;
        let c0 = rng.below_at(base + 3, (cols - w + 1) as u64) as usize;
        for r in r0..r0 + h {
            for m in &mut mask[r * cols + c0..r * cols + c0 + w] {
                if *m == 0 {
                    *m = 1;
                    covered += 1;
                }
            }
        }
        draw += 1;
    }
    // Pathological coverages close to 1 can stall; finish in scan order.
    for m in mask.iter_mut() {
        if covered >= target {
            break;
        }
        if *m == 0 {
            *m = 1;
            covered += 1;
        }
    }
    Ok(mask)
}
