//! Image-quality metrics on single-channel fields in normalised units.

use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// A row-major `rows x cols` field.
#[derive(Debug, Clone, Copy)]
pub struct Image<'a> {
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

impl<'a> Image<'a> {
    pub fn new(rows: usize, cols: usize, data: &'a [f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(HarnessError::Metric(format!("{} values for a {rows}x{cols} image", data.len())));
        }
        Ok(Self { rows, cols, data })
    }
}

fn same_shape(a: &Image<'_>, b: &Image<'_>) -> Result<()> {
    if (a.rows, a.cols) != (b.rows, b.cols) {
        return Err(HarnessError::Metric(format!("{}x{} vs {}x{}", a.rows, a.cols, b.rows, b.cols)));
    }
    Ok(())
}

fn check_range(data_range: f64) -> Result<()> {
    if !(data_range > 0.0 && data_range.is_finite()) {
        return Err(HarnessError::Metric(format!("data range must be positive, got {data_range}")));
    }
    Ok(())
}

fn select<'s>(n: usize, mask: Option<&'s [u8]>) -> impl Iterator<Item = usize> + 's {
    (0..n).filter(move |&i| mask.map_or(true, |m| m[i] == 1))
}

/// Mean absolute error over the selected pixels, `None` if none are selected.
pub fn mae(pred: &Image<'_>, target: &Image<'_>, mask: Option<&[u8]>) -> Result<Option<f64>> {
    same_shape(pred, target)?;
    let (mut s, mut n) = (0.0, 0usize);
    for i in select(pred.data.len(), mask) {
        s += (pred.data[i] - target.data[i]).abs();
        n += 1;
    }
    Ok((n > 0).then(|| s / n as f64))
}

pub fn mse(pred: &Image<'_>, target: &Image<'_>, mask: Option<&[u8]>) -> Result<Option<f64>> {
    same_shape(pred, target)?;
    let (mut s, mut n) = (0.0, 0usize);
    for i in select(pred.data.len(), mask) {
        let d = pred.data[i] - target.data[i];
        s += d * d;
        n += 1;
    }
    Ok((n > 0).then(|| s / n as f64))
}

/// `10 log10(range^2 / mse)`, capped at [`PSNR_CAP_DB`] once the error is negligible.
pub fn psnr_from_mse(mse: f64, data_range: f64) -> f64 {
    if mse < 1e-12 {
        PSNR_CAP_DB
    } else {
        (10.0 * (data_range * data_range / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(pred: &Image<'_>, target: &Image<'_>, mask: Option<&[u8]>, data_range: f64) -> Result<Option<f64>> {
    check_range(data_range)?;
    Ok(mse(pred, target, mask)?.map(|m| psnr_from_mse(m, data_range)))
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Separable "valid" filtering: output is `(rows - k + 1) x (cols - k + 1)`.
fn filter_valid(data: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (orows, ocols) = (rows + 1 - k, cols + 1 - k);
    let mut horiz = vec![0.0; rows * ocols];
    for r in 0..rows {
        for c in 0..ocols {
            horiz[r * ocols + c] = taps.iter().enumerate().map(|(t, w)| w * data[r * cols + c + t]).sum();
        }
    }
    let mut out = vec![0.0; orows * ocols];
    for r in 0..orows {
        for c in 0..ocols {
            out[r * ocols + c] = taps.iter().enumerate().map(|(t, w)| w * horiz[(r + t) * ocols + c]).sum();
        }
    }
    out
}

/// Per-window SSIM over every position where the 11x11 Gaussian window fits,
/// row-major with `(rows - 10) x (cols - 10)` entries.
pub fn ssim_map(pred: &Image<'_>, target: &Image<'_>, data_range: f64) -> Result<Vec<f64>> {
    same_shape(pred, target)?;
    check_range(data_range)?;
    if pred.rows < SSIM_WINDOW || pred.cols < SSIM_WINDOW {
        return Err(HarnessError::Metric(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {}x{}", pred.rows, pred.cols)));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let (rows, cols) = (pred.rows, pred.cols);
    let f = |d: &[f64]| filter_valid(d, rows, cols, &taps);
    let prod = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x * y).collect() };
    let (x, y) = (pred.data, target.data);
    let (mx, my) = (f(x), f(y));
    let (exx, eyy, exy) = (f(&prod(x, x)), f(&prod(y, y)), f(&prod(x, y)));
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    Ok((0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = exx[i] - ux * ux;
            let vy = eyy[i] - uy * uy;
            let cxy = exy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .collect())
}

/// Mean SSIM; with a mask, the mean over windows centred on masked pixels.
pub fn ssim(pred: &Image<'_>, target: &Image<'_>, mask: Option<&[u8]>, data_range: f64) -> Result<Option<f64>> {
    let map = ssim_map(pred, target, data_range)?;
    let half = SSIM_WINDOW / 2;
    let ocols = pred.cols + 1 - SSIM_WINDOW;
    let (mut s, mut n) = (0.0, 0usize);
    for (i, v) in map.iter().enumerate() {
        let (r, c) = (i / ocols + half, i % ocols + half);
        if mask.map_or(true, |m| m[r * pred.cols + c] == 1) {
            s += v;
            n += 1;
        }
    }
    Ok((n > 0).then(|| s / n as f64))
}

/// One evaluated slice. Masked values are absent when the mask is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub psnr: f64,
    pub ssim: f64,
    pub mae: f64,
    pub masked_psnr: Option<f64>,
    pub masked_ssim: Option<f64>,
    pub masked_mae: Option<f64>,
}

pub fn compute_metrics(
    label: &str,
    pred: &Image<'_>,
    target: &Image<'_>,
    mask: &[u8],
    data_range: f64,
) -> Result<MetricRow> {
    if mask.len() != pred.data.len() {
        return Err(HarnessError::Metric(format!("mask has {} entries for {} pixels", mask.len(), pred.data.len())));
    }
    let full = |v: Option<f64>| v.expect("full image is never empty");
    Ok(MetricRow {
        label: label.to_string(),
        psnr: full(psnr(pred, target, None, data_range)?),
        ssim: full(ssim(pred, target, None, data_range)?),
        mae: full(mae(pred, target, None)?),
        masked_psnr: psnr(pred, target, Some(mask), data_range)?,
        masked_ssim: ssim(pred, target, Some(mask), data_range)?,
        masked_mae: mae(pred, target, Some(mask))?,
    })
}

/// Arithmetic mean of rows; masked columns average the rows that have them.
pub fn aggregate(label: &str, rows: &[MetricRow]) -> Result<MetricRow> {
    if rows.is_empty() {
        return Err(HarnessError::Metric("no rows to aggregate".into()));
    }
    let mean = |f: &dyn Fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let mean_opt = |f: &dyn Fn(&MetricRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(MetricRow {
        label: label.to_string(),
        psnr: mean(&|r| r.psnr),
        ssim: mean(&|r| r.ssim),
        mae: mean(&|r| r.mae),
        masked_psnr: mean_opt(&|r| r.masked_psnr),
        masked_ssim: mean_opt(&|r| r.masked_ssim),
        masked_mae: mean_opt(&|r| r.masked_mae),
    })
}
