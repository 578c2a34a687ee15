//! Alternating generator / critic optimisation with CSV logs and checkpoints.

use std::fs::File;
use std::path::{Path, PathBuf};

use atmos_core::dataset::{read_archive, Dataset, Partition};
use atmos_core::rng::derive_key;
use atmos_diffops::{Ctx, Tape};
use fourcastx::objectives::{
    discriminator_adversarial, discriminator_r1, evidential_nll, evidential_reg, feature_matching, generator_adversarial,
    hrf_perceptual, l1, physics_mix, total_generator_loss, GeneratorTerms, HrfExtractor,
};
use fourcastx::{LossReport, ModelError};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::data::{epoch_order, Batch, Sample};
use crate::error::{io_err, HarnessError, Result};
use crate::evaluate::evaluate_samples;
use crate::models::Models;
use crate::optim::{cosine_lr, decayed_lr, AdamW};

pub const LOSS_LOG: &str = "losses.csv";
pub const METRIC_LOG: &str = "metrics.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const FAULT_FILE: &str = "fault.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Loss log columns after `step`; `total` (the weighted generator objective) is last.
pub const LOSS_COLUMNS: [&str; 13] =
    ["epoch", "nll", "ev_reg", "adv", "hrf", "fm", "l1", "mix", "d_adv", "r1", "lr_g", "lr_d", "total"];

pub const METRIC_COLUMNS: [&str; 8] = ["step", "epoch", "psnr", "ssim", "mae", "masked_psnr", "masked_ssim", "masked_mae"];

pub fn checkpoint_path(run_dir: &Path, epoch: usize) -> PathBuf {
    run_dir.join(CHECKPOINT_DIR).join(format!("epoch_{epoch:04}.atmp"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub generator: LossReport,
    pub d_adv: f64,
    pub r1: f64,
    pub lr_g: f64,
    pub lr_d: f64,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub steps: usize,
    pub checkpoints: Vec<PathBuf>,
    pub last: Option<StepLog>,
}

/// Everything the loop mutates.
struct Trainer<'c> {
    cfg: &'c ExperimentConfig,
    models: Models,
    hrf: HrfExtractor<f32>,
    opt_g: AdamW,
    opt_d: AdamW,
}

fn fault(run_dir: &Path, step: usize, term: &str, detail: &str) -> HarnessError {
    let path = run_dir.join(FAULT_FILE);
    let body = json!({ "step": step, "term": term, "detail": detail });
    // The training error is what matters; a failed fault write is not reported on top.
    let _ = std::fs::write(&path, body.to_string());
    HarnessError::NonFinite { step, term: term.to_string() }
}

fn as_fault(run_dir: &Path, step: usize, e: ModelError) -> HarnessError {
    match e {
        ModelError::NonFinite { term, index, detail } => fault(run_dir, step, &term, &format!("index {index}: {detail}")),
        other => other.into(),
    }
}

impl Trainer<'_> {
    /// One generator update followed by one critic update on the same batch.
    fn step(&mut self, batch: &Batch, step: usize, epoch: usize, lr_g: f64, lr_d: f64, run_dir: &Path) -> Result<StepLog> {
        let w = &self.cfg.loss;
        let m = &self.models;
        let (report, grads_g, fake) = {
            let tape = Tape::new();
            let noise_seed = derive_key(&[self.cfg.seeds.training, step as u64, 1]);
            let gctx = Ctx::new(&tape, &m.store).training(noise_seed, m.config.sigma_noise);
            let dctx = Ctx::new(&tape, &m.store).frozen();
            let a = tape.constant(batch.atb_masked.clone());
            let k = tape.constant(batch.mask.clone());
            let y = tape.constant(batch.target.clone());
            let pred = m.generator.forward(&gctx, a, k)?;
            let terms = (|| -> std::result::Result<GeneratorTerms<'_, f32>, ModelError> {
                let fake_out = m.critic.forward(&dctx, pred.gamma, k, a)?;
                let real_out = m.critic.forward(&dctx, y, k, a)?;
                Ok(GeneratorTerms {
                    nll: evidential_nll(&pred, &batch.target)?,
                    ev_reg: evidential_reg(&pred, &batch.target)?,
                    adv: generator_adversarial(fake_out.logits),
                    hrf: hrf_perceptual(&self.hrf, pred.gamma, y)?,
                    fm: feature_matching(&real_out.features, &fake_out.features)?,
                    l1: l1(pred.gamma, &batch.target)?,
                    mix: physics_mix(pred.gamma, &batch.atb, &batch.mask, &batch.target)?,
                })
            })()
            .map_err(|e| as_fault(run_dir, step, e))?;
            let (total, report) = total_generator_loss(&terms, w).map_err(|e| as_fault(run_dir, step, e))?;
            let grads = tape.backward(total)?;
            (report, gctx.param_grads(&grads), (*pred.gamma.value()).clone())
        };
        self.opt_g.step(&mut self.models.store, &grads_g, lr_g);

        let m = &self.models;
        let (d_adv, mut grads_d) = {
            let tape = Tape::new();
            let ctx = Ctx::new(&tape, &m.store);
            let a = tape.constant(batch.atb_masked.clone());
            let k = tape.constant(batch.mask.clone());
            let real = m.critic.forward(&ctx, tape.constant(batch.target.clone()), k, a)?.logits;
            let fake = m.critic.forward(&ctx, tape.constant(fake), k, a)?.logits;
            let loss = discriminator_adversarial(real, fake)?;
            let v = loss.value().data()[0] as f64;
            if !v.is_finite() {
                return Err(fault(run_dir, step, "d_adv", &format!("value {v}")));
            }
            let grads = tape.backward(loss)?;
            (v, ctx.param_grads(&grads))
        };
        let r1 = discriminator_r1(&m.critic, &m.store, &batch.target, &batch.mask, &batch.atb_masked, w.r1_gamma)?;
        if !r1.value.is_finite() {
            return Err(fault(run_dir, step, "r1", &format!("value {}", r1.value)));
        }
        for (id, g) in r1.param_grads {
            match grads_d.iter_mut().find(|(j, _)| *j == id) {
                Some((_, acc)) => acc.add_assign(&g),
                None => grads_d.push((id, g)),
            }
        }
        self.opt_d.step(&mut self.models.store, &grads_d, lr_d);
        Ok(StepLog { step, epoch, generator: report, d_adv, r1: r1.value, lr_g, lr_d })
    }

    fn checkpoint(&self, run_dir: &Path, epoch: usize, step: usize) -> Result<PathBuf> {
        let path = checkpoint_path(run_dir, epoch);
        self.models.save(&path, json!({ "experiment": self.cfg, "epoch": epoch, "step": step }))?;
        Ok(path)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn opt_fmt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn log_validation(w: &mut csv::Writer<File>, models: &Models, val: &[Sample], step: usize, epoch: usize) -> Result<()> {
    if val.is_empty() {
        return Ok(());
    }
    let a = evaluate_samples(models, val, None)?.aggregate;
    w.write_record([
        step.to_string(),
        epoch.to_string(),
        fmt(a.psnr),
        fmt(a.ssim),
        fmt(a.mae),
        opt_fmt(a.masked_psnr),
        opt_fmt(a.masked_ssim),
        opt_fmt(a.masked_mae),
    ])?;
    w.flush().map_err(|e| HarnessError::Io { path: METRIC_LOG.into(), source: e })?;
    Ok(())
}

/// Training slices actually used: the first `train_slices` of the partition.
pub fn training_samples(cfg: &ExperimentConfig, dataset: &Dataset) -> Vec<Sample> {
    let mut train = dataset.partition(Partition::Train);
    if let Some(n) = cfg.train_slices {
        train.truncate(n);
    }
    train.into_iter().map(Sample::from_slice).collect()
}

/// The fixed validation subset; falls back to training slices when the test
/// partition is empty.
pub fn validation_samples(cfg: &ExperimentConfig, dataset: &Dataset) -> Vec<Sample> {
    let mut val = dataset.partition(Partition::Test);
    if val.is_empty() {
        val = dataset.partition(Partition::Train);
    }
    val.truncate(cfg.validation_slices);
    val.into_iter().map(Sample::from_slice).collect()
}

pub fn train(cfg: &ExperimentConfig) -> Result<TrainSummary> {
    let dataset = read_archive(&cfg.paths.archive)?;
    train_on(cfg, &dataset, &cfg.paths.run_dir)
}

pub fn train_on(cfg: &ExperimentConfig, dataset: &Dataset, run_dir: &Path) -> Result<TrainSummary> {
    train_samples(cfg, &training_samples(cfg, dataset), &validation_samples(cfg, dataset), run_dir)
}

/// The loop itself, on already normalised samples.
pub fn train_samples(cfg: &ExperimentConfig, samples: &[Sample], validation: &[Sample], run_dir: &Path) -> Result<TrainSummary> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(HarnessError::Config("training partition is empty".into()));
    }
    if samples.iter().any(|s| (s.rows, s.cols) != (cfg.network.height, cfg.network.width)) {
        return Err(HarnessError::Config(format!(
            "slices are {}x{} but the network expects {}x{}",
            samples[0].rows, samples[0].cols, cfg.network.height, cfg.network.width
        )));
    }
    let ckpt_dir = run_dir.join(CHECKPOINT_DIR);
    std::fs::create_dir_all(&ckpt_dir).map_err(io_err(&ckpt_dir))?;
    cfg.save(&run_dir.join(CONFIG_FILE))?;
    let _ = std::fs::remove_file(run_dir.join(FAULT_FILE));

    let mut trainer = Trainer {
        cfg,
        models: Models::new(&cfg.network)?,
        hrf: HrfExtractor::new(cfg.seeds.hrf)?,
        opt_g: AdamW::new(&cfg.optimizer),
        opt_d: AdamW::new(&cfg.optimizer),
    };
    let loss_path = run_dir.join(LOSS_LOG);
    let mut losses = csv::Writer::from_path(&loss_path)?;
    losses.write_record(std::iter::once("step").chain(LOSS_COLUMNS))?;
    let mut metrics = csv::Writer::from_path(run_dir.join(METRIC_LOG))?;
    metrics.write_record(METRIC_COLUMNS)?;

    let mut checkpoints = vec![trainer.checkpoint(run_dir, 0, 0)?];
    log_validation(&mut metrics, &trainer.models, validation, 0, 0)?;

    let per_epoch = samples.len().div_ceil(cfg.batch_size);
    let mut total = cfg.epochs * per_epoch;
    if let Some(cap) = cfg.max_steps {
        total = total.min(cap);
    }
    let mut step = 0;
    let mut last = None;
    let mut epoch = 0;
    while step < total {
        epoch += 1;
        let lr_d = decayed_lr(cfg.optimizer.disc_lr, cfg.schedule.disc_decay, epoch - 1);
        let order = epoch_order(samples.len(), cfg.seeds.training, epoch);
        for chunk in order.chunks(cfg.batch_size) {
            if step >= total {
                break;
            }
            let batch = Batch::new(&chunk.iter().map(|&i| &samples[i]).collect::<Vec<_>>())?;
            let lr_g = cosine_lr(cfg.optimizer.lr, cfg.schedule.lr_floor, step, total);
            step += 1;
            let log = trainer.step(&batch, step, epoch, lr_g, lr_d, run_dir)?;
            let g = log.generator;
            let row = [
                step.to_string(),
                epoch.to_string(),
                fmt(g.nll),
                fmt(g.ev_reg),
                fmt(g.adv),
                fmt(g.hrf),
                fmt(g.fm),
                fmt(g.l1),
                fmt(g.mix),
                fmt(log.d_adv),
                fmt(log.r1),
                fmt(log.lr_g),
                fmt(log.lr_d),
                fmt(g.total),
            ];
            losses.write_record(&row)?;
            last = Some(log);
        }
        losses.flush().map_err(io_err(&loss_path))?;
        let finished = step >= total;
        if epoch % cfg.validate_every == 0 || finished {
            log_validation(&mut metrics, &trainer.models, validation, step, epoch)?;
        }
        if epoch % cfg.checkpoint_every == 0 || finished {
            checkpoints.push(trainer.checkpoint(run_dir, epoch, step)?);
        }
    }
    Ok(TrainSummary { steps: step, checkpoints, last })
}
