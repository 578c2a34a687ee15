//! Checkpoint evaluation: per-slice metrics, aggregates, the copy-input
//! baseline and optional image dumps.

use std::path::{Path, PathBuf};

use atmos_core::dataset::{Dataset, Partition};

use crate::data::Sample;
use crate::error::{io_err, HarnessError, Result};
use crate::metrics::{aggregate, compute_metrics, Image, MetricRow};
use crate::models::Models;
use crate::pgm::{value_range, write_pgm};

/// Metrics are computed on normalised fields.
pub const DATA_RANGE: f64 = 1.0;
pub const AGGREGATE_LABEL: &str = "mean";
pub const MODEL_CSV: &str = "metrics.csv";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const IMAGE_DIR: &str = "images";

/// Image kinds written per slice, in this order.
pub const DUMP_KINDS: [&str; 5] = ["input", "gamma", "target", "aleatoric", "epistemic"];

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    pub aggregate: MetricRow,
    /// `atb_masked` scored against the target.
    pub baseline_rows: Vec<MetricRow>,
    pub baseline_aggregate: MetricRow,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub partition: Partition,
    /// Only the first `n` slices of the partition.
    pub limit: Option<usize>,
    pub dump_dir: Option<PathBuf>,
}

fn dump(dir: &Path, s: &Sample, fields: [&[f64]; 5]) -> Result<()> {
    for (kind, data) in DUMP_KINDS.iter().zip(fields) {
        // Signal fields share the normalised [0, 1] scale; uncertainties are stretched per image.
        let (lo, hi) = if matches!(*kind, "aleatoric" | "epistemic") { value_range(data) } else { (0.0, DATA_RANGE) };
        write_pgm(&dir.join(format!("{}_{kind}.pgm", s.label)), s.rows, s.cols, data, lo, hi)?;
    }
    Ok(())
}

pub fn evaluate_samples(models: &Models, samples: &[Sample], dump_dir: Option<&Path>) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(HarnessError::Eval("no slices to evaluate".into()));
    }
    if let Some(d) = dump_dir {
        std::fs::create_dir_all(d).map_err(io_err(d))?;
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut baseline_rows = Vec::with_capacity(samples.len());
    for s in samples {
        let pred = models.predict(s)?;
        let input = s.atb_masked();
        let target = Image::new(s.rows, s.cols, &s.target)?;
        rows.push(compute_metrics(&s.label, &Image::new(s.rows, s.cols, &pred.gamma)?, &target, &s.mask, DATA_RANGE)?);
        baseline_rows.push(compute_metrics(&s.label, &Image::new(s.rows, s.cols, &input)?, &target, &s.mask, DATA_RANGE)?);
        if let Some(d) = dump_dir {
            dump(d, s, [&input, &pred.gamma, &s.target, &pred.aleatoric, &pred.epistemic])?;
        }
    }
    Ok(EvalReport {
        aggregate: aggregate(AGGREGATE_LABEL, &rows)?,
        baseline_aggregate: aggregate(AGGREGATE_LABEL, &baseline_rows)?,
        rows,
        baseline_rows,
    })
}

pub fn evaluate(models: &Models, dataset: &Dataset, opts: &EvalOptions) -> Result<EvalReport> {
    let mut slices = dataset.partition(opts.partition);
    if let Some(n) = opts.limit {
        slices.truncate(n);
    }
    if slices.is_empty() {
        return Err(HarnessError::Eval(format!("{:?} partition is empty", opts.partition)));
    }
    let samples: Vec<Sample> = slices.into_iter().map(Sample::from_slice).collect();
    evaluate_samples(models, &samples, opts.dump_dir.as_deref())
}

/// Per-slice rows followed by the aggregate row.
pub fn write_metric_csv(path: &Path, rows: &[MetricRow], aggregate: &MetricRow) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows.iter().chain(std::iter::once(aggregate)) {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_metric_csv(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?)
}

/// Writes `metrics.csv` and `baseline.csv` into `out_dir`.
pub fn write_report(out_dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    write_metric_csv(&out_dir.join(MODEL_CSV), &report.rows, &report.aggregate)?;
    write_metric_csv(&out_dir.join(BASELINE_CSV), &report.baseline_rows, &report.baseline_aggregate)
}
