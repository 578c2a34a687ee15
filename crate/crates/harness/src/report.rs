//! Markdown summaries of metric CSVs and |prediction - target| images.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{io_err, HarnessError, Result};
use crate::evaluate::{read_metric_csv, AGGREGATE_LABEL, BASELINE_CSV, IMAGE_DIR, MODEL_CSV};
use crate::metrics::MetricRow;
use crate::pgm::{read_pgm, write_pgm};
use crate::train::METRIC_LOG;

pub const SUMMARY_FILE: &str = "summary.md";
pub const DIFF_DIR: &str = "diff";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub summary: PathBuf,
    pub difference_images: Vec<PathBuf>,
}

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.digits$}"))
}

fn table_row(name: &str, r: &MetricRow) -> String {
    format!(
        "| {name} | {} | {} | {} | {} | {} | {} |\n",
        cell(Some(r.psnr), 3),
        cell(Some(r.ssim), 4),
        cell(Some(r.mae), 5),
        cell(r.masked_psnr, 3),
        cell(r.masked_ssim, 4),
        cell(r.masked_mae, 5)
    )
}

const HEADER: &str = "| | PSNR (dB) | SSIM | MAE | masked PSNR | masked SSIM | masked MAE |\n|---|---|---|---|---|---|---|\n";

fn aggregate_of(rows: &[MetricRow]) -> Result<&MetricRow> {
    rows.iter()
        .rev()
        .find(|r| r.label == AGGREGATE_LABEL)
        .ok_or_else(|| HarnessError::Eval(format!("no `{AGGREGATE_LABEL}` row")))
}

/// Renders the evaluation directory `eval_dir` (and, if given, a training
/// run's validation log) into `out_dir`.
pub fn render_report(eval_dir: &Path, run_dir: Option<&Path>, out_dir: &Path) -> Result<ReportOutput> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let model = read_metric_csv(&eval_dir.join(MODEL_CSV))?;
    let mut md = String::from("# Evaluation summary\n\n## Aggregate\n\n");
    md.push_str(HEADER);
    md.push_str(&table_row("model", aggregate_of(&model)?));
    let baseline_path = eval_dir.join(BASELINE_CSV);
    if baseline_path.exists() {
        let baseline = read_metric_csv(&baseline_path)?;
        md.push_str(&table_row("copy input", aggregate_of(&baseline)?));
    }
    md.push_str("\n## Per slice\n\n");
    md.push_str(HEADER);
    for r in model.iter().filter(|r| r.label != AGGREGATE_LABEL) {
        md.push_str(&table_row(&r.label, r));
    }
    if let Some(run) = run_dir {
        let log = run.join(METRIC_LOG);
        let mut reader = csv::Reader::from_path(&log)?;
        md.push_str("\n## Validation during training\n\n| step | epoch | PSNR | SSIM | MAE | masked MAE |\n|---|---|---|---|---|---|\n");
        for rec in reader.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("").to_string();
            let _ = writeln!(md, "| {} | {} | {} | {} | {} | {} |", f(0), f(1), f(2), f(3), f(4), f(7));
        }
    }
    let difference_images = difference_images(&eval_dir.join(IMAGE_DIR), &out_dir.join(DIFF_DIR))?;
    if !difference_images.is_empty() {
        let _ = writeln!(md, "\n{} difference images (|gamma - target|, full scale = 1) in `{DIFF_DIR}/`.", difference_images.len());
    }
    let summary = out_dir.join(SUMMARY_FILE);
    std::fs::write(&summary, md).map_err(io_err(&summary))?;
    Ok(ReportOutput { summary, difference_images })
}

/// One `|gamma - target|` graymap per dumped slice, in label order.
fn difference_images(images: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    if !images.is_dir() {
        return Ok(Vec::new());
    }
    let mut labels: Vec<String> = std::fs::read_dir(images)
        .map_err(io_err(images))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter_map(|n| n.strip_suffix("_gamma.pgm").map(str::to_string))
        .collect();
    labels.sort();
    if labels.is_empty() {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::with_capacity(labels.len());
    for label in labels {
        let (r, c, g) = read_pgm(&images.join(format!("{label}_gamma.pgm")))?;
        let (r2, c2, t) = read_pgm(&images.join(format!("{label}_target.pgm")))?;
        if (r, c) != (r2, c2) {
            return Err(HarnessError::Eval(format!("{label}: gamma and target sizes differ")));
        }
        let diff: Vec<f64> = g.iter().zip(&t).map(|(a, b)| (a - b).abs()).collect();
        let path = out.join(format!("{label}_diff.pgm"));
        write_pgm(&path, r, c, &diff, 0.0, 1.0)?;
        written.push(path);
    }
    Ok(written)
}
