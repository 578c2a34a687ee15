//! Finite-difference checks of the assembled networks and the generator
//! objective, run at f64 on small inputs.

use atmos_diffops::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use atmos_diffops::suite::random;
use atmos_diffops::{Ctx, ParamStore, Tensor, Var};

use crate::config::NetworkConfig;
use crate::discriminator::Discriminator;
use crate::error::Result;
use crate::generator::Generator;
use crate::objectives::{
    evidential_nll, evidential_reg, feature_matching, generator_adversarial, hrf_perceptual, l1, physics_mix,
    total_generator_loss, GeneratorTerms, HrfExtractor, LossWeights,
};

/// Smallest generator input: three halvings must leave an even grid.
pub const GENERATOR_CHECK_SIZE: usize = 16;
/// Smallest critic input with a non-empty logit map.
pub const CRITIC_CHECK_SIZE: usize = 24;
/// The full objective needs both networks on one image.
pub const OBJECTIVE_CHECK_SIZE: usize = 32;

fn unit(shape: &[usize], seed: u64) -> Tensor<f64> {
    random(shape, seed).map(|v| 0.5 * (v + 1.0))
}

fn binary(shape: &[usize], seed: u64) -> Tensor<f64> {
    random(shape, seed).map(|v| if v > 0.3 { 1.0 } else { 0.0 })
}

/// Gradients of all four evidential outputs with respect to the generator
/// inputs and parameters.
pub fn check_generator(cfg: &NetworkConfig, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let s = GENERATOR_CHECK_SIZE;
    let cfg = NetworkConfig { height: s, width: s, ..cfg.clone() };
    let mut store = ParamStore::<f64>::new(cfg.seed);
    let gen = Generator::new(&mut store, &cfg)?;
    let inputs = [unit(&[1, 1, s, s], 11), binary(&[1, 1, s, s], 12)];
    Ok(grad_check(
        &store,
        &inputs,
        |ctx, v| {
            let p = gen.forward(ctx, v[0], v[1])?;
            Ok(Var::concat_channels(&[p.gamma, p.nu, p.alpha, p.beta])?)
        },
        opts,
    ))
}

/// Patch logits with respect to the image and critic parameters.
pub fn check_discriminator(cfg: &NetworkConfig, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let s = CRITIC_CHECK_SIZE;
    let mut store = ParamStore::<f64>::new(cfg.seed ^ 0xd15c);
    let disc = Discriminator::new(&mut store, cfg)?;
    let (mask, atb) = (binary(&[1, 1, s, s], 21), unit(&[1, 1, s, s], 22));
    let inputs = [unit(&[1, 1, s, s], 23)];
    Ok(grad_check(
        &store,
        &inputs,
        |ctx, v| {
            let tape = ctx.tape();
            let out = disc.forward(ctx, v[0], tape.constant(mask.clone()), tape.constant(atb.clone()))?;
            Ok(out.logits)
        },
        opts,
    ))
}

/// The weighted generator objective with every term active, differentiated
/// through the frozen critic and extractor.
pub fn check_generator_objective(cfg: &NetworkConfig, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let s = OBJECTIVE_CHECK_SIZE;
    let cfg = NetworkConfig { height: s, width: s, ..cfg.clone() };
    let mut store = ParamStore::<f64>::new(cfg.seed);
    let gen = Generator::new(&mut store, &cfg)?;
    let mut dstore = ParamStore::<f64>::new(cfg.seed ^ 0xd15c);
    let disc = Discriminator::new(&mut dstore, &cfg)?;
    let hrf = HrfExtractor::<f64>::new(cfg.seed ^ 0x4a4f)?;
    let shape = [1, 1, s, s];
    let (atb, mask, y) = (unit(&shape, 31), binary(&shape, 32), unit(&shape, 33));
    let masked = atb.zip_map(&mask, |a, m| a * (1.0 - m));
    let weights = LossWeights::default();
    let inputs = [masked.clone(), mask.clone()];
    Ok(grad_check(
        &store,
        &inputs,
        |ctx, v| {
            let tape = ctx.tape();
            let pred = gen.forward(ctx, v[0], v[1])?;
            let dctx = Ctx::new(tape, &dstore).frozen();
            let (mc, ac) = (tape.constant(mask.clone()), tape.constant(masked.clone()));
            let fake = disc.forward(&dctx, pred.gamma, mc, ac)?;
            let real = disc.forward(&dctx, tape.constant(y.clone()), mc, ac)?;
            let terms = GeneratorTerms {
                nll: evidential_nll(&pred, &y)?,
                ev_reg: evidential_reg(&pred, &y)?,
                adv: generator_adversarial(fake.logits),
                hrf: hrf_perceptual(&hrf, pred.gamma, tape.constant(y.clone()))?,
                fm: feature_matching(&real.features, &fake.features)?,
                l1: l1(pred.gamma, &y)?,
                mix: physics_mix(pred.gamma, &atb, &mask, &y)?,
            };
            Ok(total_generator_loss(&terms, &weights)?.0)
        },
        opts,
    ))
}

/// Named reports for the assembled model checks.
pub fn model_suite(cfg: &NetworkConfig, opts: &GradCheckOptions) -> Result<Vec<(String, GradCheckReport)>> {
    Ok(vec![
        ("generator".to_string(), check_generator(cfg, opts)?),
        ("discriminator".to_string(), check_discriminator(cfg, opts)?),
        ("generator_objective".to_string(), check_generator_objective(cfg, opts)?),
    ])
}
