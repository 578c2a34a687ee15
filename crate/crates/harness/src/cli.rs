//! The `atmos` command line.

use std::path::{Path, PathBuf};

use atmos_core::dataset::{build_dataset, read_archive, regrid, slice_meridional, write_archive, Dataset, Partition};
use atmos_core::{generate_scene, scene_catalog, simulate, LidarConfig};
use atmos_diffops::gradcheck::{GradCheckOptions, GradCheckReport};
use atmos_diffops::suite::operator_suite;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fourcastx::checks::model_suite;
use serde_json::json;

use crate::config::{ExperimentConfig, Preset};
use crate::error::{io_err, HarnessError, Result};
use crate::evaluate::{evaluate, write_report, EvalOptions, IMAGE_DIR};
use crate::models::Models;
use crate::report::render_report;
use crate::train::train;

#[derive(Debug, Parser)]
#[command(name = "atmos", about = "Lidar backscatter restoration benchmark", arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Full,
    Overfit,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Desk => Preset::Desk,
            PresetArg::Full => Preset::Full,
            PresetArg::Overfit => Preset::Overfit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Train,
    Test,
}

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in configuration, used when no `--config` is given.
    #[arg(long, value_enum, conflicts_with = "config")]
    pub preset: Option<PresetArg>,
    /// Reseeds data, network and training from one value.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file or directory (meaning depends on the subcommand).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, p) => ExperimentConfig::preset(p.map_or(Preset::Desk, Preset::from)),
        };
        if let Some(s) = self.seed {
            cfg.apply_seed(s);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scene catalog (JSON) plus an archive of zero-tau slices.
    GenScenes(Common),
    /// Archive of simulated ATB/BC slices, unmasked and unsplit.
    Simulate(Common),
    /// Masked, split dataset archive.
    BuildDataset(Common),
    /// Finite-difference checks of every operator and the assembled networks.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Coordinates sampled per tensor in the assembled-network checks.
        #[arg(long, default_value_t = 3)]
        coords: usize,
    },
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset archive (overrides the configuration).
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Metrics for a checkpoint on one partition.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        archive: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        partition: PartitionArg,
        /// Only the first `n` slices.
        #[arg(long)]
        limit: Option<usize>,
        /// Also write input, gamma, target and uncertainty images.
        #[arg(long)]
        dump_images: bool,
    },
    /// Summary tables and difference images from an evaluation directory.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory written by `eval`.
        #[arg(long)]
        input: PathBuf,
        /// Training run whose validation log is included.
        #[arg(long)]
        run: Option<PathBuf>,
    },
}

fn out_or(common: &Common, default: &Path) -> PathBuf {
    common.out.clone().unwrap_or_else(|| default.to_path_buf())
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(io_err(p)),
        _ => Ok(()),
    }
}

/// Every descriptor simulated and sliced; `zero_tau` drops extinction first.
pub fn simulated_dataset(cfg: &ExperimentConfig, zero_tau: bool) -> Result<Dataset> {
    let d = &cfg.data;
    d.validate()?;
    let mut slices = Vec::with_capacity(d.slice_count());
    for desc in scene_catalog(d.n_scenes, d.seed)? {
        let mut volume = generate_scene(desc.seed, &d.model_grid, &d.scene, desc.wavelength)?;
        if zero_tau {
            volume = volume.without_extinction();
        }
        let pair = simulate(&volume, &LidarConfig { wavelength: desc.wavelength, eta: d.eta })?;
        for mut s in slice_meridional(&regrid(&pair, &d.target_grid)?) {
            s.scene_index = desc.scene_index;
            s.norm = d.norm;
            slices.push(s);
        }
    }
    let mut ds = Dataset::new(slices, d.norm, d.seed);
    ds.manifest.train = (0..ds.slices.len()).collect();
    Ok(ds)
}

fn print_reports(reports: &[(String, GradCheckReport)]) -> bool {
    let mut ok = true;
    for (name, r) in reports {
        ok &= r.pass;
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("{status} {name:<28} max_rel_err {:.3e} checked {} kinks {}", r.max_rel_err, r.n_checked, r.n_kinks);
        if let Some(f) = &r.failure {
            println!("     {f}");
        }
    }
    ok
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenScenes(c) => {
            let cfg = c.resolve()?;
            let out = out_or(&c, Path::new("data/scenes"));
            std::fs::create_dir_all(&out).map_err(io_err(&out))?;
            let catalog = scene_catalog(cfg.data.n_scenes, cfg.data.seed)?;
            let body = json!({ "data": cfg.data, "descriptors": catalog });
            let cat_path = out.join("catalog.json");
            std::fs::write(&cat_path, serde_json::to_string_pretty(&body)?).map_err(io_err(&cat_path))?;
            let ds = simulated_dataset(&cfg, true)?;
            let m = write_archive(&ds, out.join("scenes.atmb"))?;
            println!("{} descriptors, {} zero-tau slices in {}", catalog.len(), m.slices.len(), out.display());
        }
        Command::Simulate(c) => {
            let cfg = c.resolve()?;
            let out = out_or(&c, Path::new("data/simulated.atmb"));
            ensure_parent(&out)?;
            let m = write_archive(&simulated_dataset(&cfg, false)?, &out)?;
            println!("{} simulated slices in {}", m.slices.len(), out.display());
        }
        Command::BuildDataset(c) => {
            let cfg = c.resolve()?;
            let out = out_or(&c, &cfg.paths.archive);
            ensure_parent(&out)?;
            let m = write_archive(&build_dataset(&cfg.data)?, &out)?;
            println!("{} slices ({} train, {} test) in {}", m.slices.len(), m.train.len(), m.test.len(), out.display());
        }
        Command::Gradcheck { common, coords } => {
            let cfg = common.resolve()?;
            let mut ok = print_reports(&operator_suite(&GradCheckOptions::default()));
            let opts = GradCheckOptions { max_coords: Some(coords), ..GradCheckOptions::default() };
            ok &= print_reports(&model_suite(&cfg.network, &opts)?);
            if !ok {
                return Err(HarnessError::Eval("gradient check failed".into()));
            }
        }
        Command::Train { common, archive } => {
            let mut cfg = common.resolve()?;
            if let Some(a) = archive {
                cfg.paths.archive = a;
            }
            if let Some(o) = &common.out {
                cfg.paths.run_dir = o.clone();
            }
            let s = train(&cfg)?;
            let last = s.checkpoints.last().expect("initial checkpoint is always written");
            println!("{} steps; last checkpoint {}", s.steps, last.display());
        }
        Command::Eval { common, checkpoint, archive, partition, limit, dump_images } => {
            let cfg = common.resolve()?;
            let archive = archive.unwrap_or(cfg.paths.archive);
            let dataset = read_archive(&archive)?;
            let (models, _) = Models::load(&checkpoint)?;
            let out = out_or(&common, &cfg.paths.run_dir.join("eval"));
            let partition = match partition {
                PartitionArg::Train => Partition::Train,
                PartitionArg::Test => Partition::Test,
            };
            let opts = EvalOptions { partition, limit, dump_dir: dump_images.then(|| out.join(IMAGE_DIR)) };
            let report = evaluate(&models, &dataset, &opts)?;
            write_report(&out, &report)?;
            let (a, b) = (&report.aggregate, &report.baseline_aggregate);
            println!(
                "{} slices: PSNR {:.3} dB (copy input {:.3}), SSIM {:.4}, MAE {:.5}; results in {}",
                report.rows.len(),
                a.psnr,
                b.psnr,
                a.ssim,
                a.mae,
                out.display()
            );
        }
        Command::Report { common, input, run } => {
            let out = out_or(&common, &input.join("report"));
            let r = render_report(&input, run.as_deref(), &out)?;
            println!("{} ({} difference images)", r.summary.display(), r.difference_images.len());
        }
    }
    Ok(())
}
