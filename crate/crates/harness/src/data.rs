//! Normalised network tensors from archive slices.

use atmos_core::dataset::{normalize, SlicePair};
use atmos_core::rng::{derive_key, shuffle, CounterRng};
use atmos_diffops::Tensor;

use crate::error::{HarnessError, Result};

/// One slice in normalised units, row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: String,
    pub rows: usize,
    pub cols: usize,
    /// Normalised BC, the restoration target.
    pub target: Vec<f64>,
    /// Normalised ATB before masking.
    pub atb: Vec<f64>,
    /// 1 = unknown.
    pub mask: Vec<u8>,
}

impl Sample {
    pub fn from_slice(s: &SlicePair) -> Self {
        let norm = |v: &[f32]| v.iter().map(|&x| normalize(x as f64, &s.norm)).collect::<Vec<_>>();
        Self {
            label: slice_label(s),
            rows: s.rows,
            cols: s.cols,
            target: norm(&s.bc),
            atb: norm(&s.atb),
            mask: s.mask.clone(),
        }
    }

    /// Network input: normalised ATB with unknown pixels zeroed.
    pub fn atb_masked(&self) -> Vec<f64> {
        self.atb.iter().zip(&self.mask).map(|(&a, &m)| if m == 1 { 0.0 } else { a }).collect()
    }
}

pub fn slice_label(s: &SlicePair) -> String {
    format!("{}_{}nm_s{:03}", s.scene_id, s.wavelength.nm(), s.slice_index)
}

/// `(B, 1, H, W)` tensors for a group of equally sized samples.
#[derive(Debug, Clone)]
pub struct Batch {
    pub target: Tensor<f32>,
    pub atb: Tensor<f32>,
    pub atb_masked: Tensor<f32>,
    pub mask: Tensor<f32>,
}

impl Batch {
    pub fn new(samples: &[&Sample]) -> Result<Self> {
        let first = samples.first().ok_or_else(|| HarnessError::Config("empty batch".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if samples.iter().any(|s| (s.rows, s.cols) != (rows, cols)) {
            return Err(HarnessError::Config("slices in a batch differ in size".into()));
        }
        let shape = [samples.len(), 1, rows, cols];
        let stack = |f: &dyn Fn(&Sample) -> Vec<f64>| {
            let v: Vec<f32> = samples.iter().flat_map(|s| f(s)).map(|x| x as f32).collect();
            Tensor::new(&shape, v)
        };
        Ok(Self {
            target: stack(&|s| s.target.clone())?,
            atb: stack(&|s| s.atb.clone())?,
            atb_masked: stack(&|s| s.atb_masked())?,
            mask: stack(&|s| s.mask.iter().map(|&m| m as f64).collect())?,
        })
    }
}

/// Sample order for one epoch, a pure function of `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    shuffle(&mut idx, &CounterRng::new(derive_key(&[seed, epoch as u64])));
    idx
}
