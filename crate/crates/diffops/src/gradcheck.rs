//! Central-difference verification of analytic gradients in `f64`.
//!
//! The checked function may return any shape; it is reduced to a scalar by a
//! fixed random projection so every output element contributes.
//!
//! Piecewise-linear activations make the readout non-differentiable on a
//! measure-zero set. When a coordinate lies within one step of such a kink the
//! central difference averages two different slopes and says nothing about
//! the gradient. Coordinates whose forward and backward differences disagree
//! by more than a tenth of the tolerance are re-differenced with steps shrunk by 10x (at
//! most three times) until the readout is smooth across the step; they are
//! counted in [`GradCheckReport::n_kinks`]. The comparison itself is always the
//! central difference against the analytic value.

use atmos_core::rng::{shuffle, CounterRng};

use crate::error::Result;
use crate::params::{Ctx, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the denominator of the relative error, so coordinates
    /// whose true gradient is ~0 are judged on absolute error.
    pub floor: f64,
    /// Coordinates sampled per tensor; `None` checks every coordinate.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-4, tolerance: 1e-3, floor: 1e-6, max_coords: None, seed: 0x9e37 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `tensor[index]: analytic vs numeric` for the worst coordinate.
    pub worst: String,
    pub n_checked: usize,
    /// Coordinates judged by a one-sided difference because of a kink.
    pub n_kinks: usize,
    pub pass: bool,
    pub failure: Option<String>,
}

impl GradCheckReport {
    fn failed(msg: String) -> Self {
        Self { max_rel_err: f64::INFINITY, worst: String::new(), n_checked: 0, n_kinks: 0, pass: false, failure: Some(msg) }
    }
}

pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks gradients of `f` with respect to `inputs` and every trainable
/// parameter of `store`. Errors and non-finite values yield a failing report.
pub fn grad_check<F>(store: &ParamStore<f64>, inputs: &[Tensor<f64>], f: F, opts: &GradCheckOptions) -> GradCheckReport
where
    F: for<'t> Fn(&Ctx<'t, f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    match run(store, inputs, &f, opts) {
        Ok(r) => r,
        Err(e) => GradCheckReport::failed(format!("evaluation error: {e}")),
    }
}

fn run<F>(store: &ParamStore<f64>, inputs: &[Tensor<f64>], f: &F, opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&Ctx<'t, f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let rng = CounterRng::new(opts.seed);
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store);
    let vars: Vec<_> = inputs.iter().map(|t| tape.var(t.clone())).collect();
    let y = f(&ctx, &vars)?;
    let yv = y.value();
    let proj = Tensor::from_fn(yv.shape(), |i| rng.fork(1).normal_at(i as u64));
    let grads = tape.backward_with(y, proj.clone())?;

    let readout = |store: &ParamStore<f64>, inputs: &[Tensor<f64>]| -> Result<f64> {
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, store).frozen();
        let vars: Vec<_> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let y = f(&ctx, &vars)?.value();
        Ok(y.data().iter().zip(proj.data()).map(|(a, b)| a * b).sum())
    };

    let mut targets: Vec<(String, Tensor<f64>)> = Vec::new();
    for (i, v) in vars.iter().enumerate() {
        targets.push((format!("input[{i}]"), grads.of(*v)));
    }
    let param_grads = ctx.param_grads(&grads);
    let trainable: Vec<_> = store.ids().filter(|&id| store.get(id).trainable).collect();
    for &id in &trainable {
        let g = param_grads
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.clone())
            .unwrap_or_else(|| Tensor::zeros(store.value(id).shape()));
        targets.push((store.get(id).name.clone(), g));
    }
    if let Some((name, _)) = targets.iter().find(|(_, g)| !g.all_finite()) {
        return Ok(GradCheckReport::failed(format!("non-finite analytic gradient for {name}")));
    }

    let mut work_store = store.clone();
    let mut work_inputs = inputs.to_vec();
    let base = readout(store, inputs)?;
    // Rounding scale of one readout evaluation.
    let noise = {
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, store).frozen();
        let vars: Vec<_> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
        let y = f(&ctx, &vars)?.value();
        let mag: f64 = y.data().iter().zip(proj.data()).map(|(a, b)| (a * b).abs()).sum();
        4.0 * f64::EPSILON * mag
    };
    let mut report =
        GradCheckReport { max_rel_err: 0.0, worst: String::new(), n_checked: 0, n_kinks: 0, pass: true, failure: None };
    for (t, (name, analytic)) in targets.iter().enumerate() {
        let n = analytic.len();
        let mut coords: Vec<usize> = (0..n).collect();
        if let Some(k) = opts.max_coords {
            if n > k {
                shuffle(&mut coords, &rng.fork(100 + t as u64));
                coords.truncate(k);
                coords.sort_unstable();
            }
        }
        for i in coords {
            let mut probe = |h: f64| -> Result<(f64, f64)> {
                if t < inputs.len() {
                    let orig = work_inputs[t].data()[i];
                    work_inputs[t].data_mut()[i] = orig + h;
                    let plus = readout(store, &work_inputs)?;
                    work_inputs[t].data_mut()[i] = orig - h;
                    let minus = readout(store, &work_inputs)?;
                    work_inputs[t].data_mut()[i] = orig;
                    Ok((plus, minus))
                } else {
                    let id = trainable[t - inputs.len()];
                    let orig = work_store.value(id).data()[i];
                    work_store.value_mut(id).data_mut()[i] = orig + h;
                    let plus = readout(&work_store, inputs)?;
                    work_store.value_mut(id).data_mut()[i] = orig - h;
                    let minus = readout(&work_store, inputs)?;
                    work_store.value_mut(id).data_mut()[i] = orig;
                    Ok((plus, minus))
                }
            };
            let a = analytic.data()[i];
            let mut h = opts.step;
            let mut refined = false;
            let numeric = loop {
                let (plus, minus) = probe(h)?;
                let central = (plus - minus) / (2.0 * h);
                // A kink inside the step shifts the central difference by half
                // the forward/backward disagreement.
                // Disagreement explained by rounding in the readout is not a kink.
                let margin = 0.1 * opts.tolerance;
                let (fwd, bwd) = ((plus - base) / h, (base - minus) / h);
                let smooth = (fwd - bwd).abs() <= margin * fwd.abs().max(bwd.abs()).max(opts.floor) + 4.0 * noise / h;
                if smooth || rel_err(a, central, opts.floor) < margin || h < opts.step * 1e-3 * 1.5 {
                    break central;
                }
                refined = true;
                h /= 10.0;
            };
            if !numeric.is_finite() {
                return Ok(GradCheckReport::failed(format!("non-finite numeric gradient at {name}[{i}]")));
            }
            report.n_kinks += refined as usize;
            // Gradients below what the difference quotient can resolve at this
            // step are judged on absolute error.
            let e = rel_err(a, numeric, opts.floor.max(noise / (h * opts.tolerance)));
            report.n_checked += 1;
            if e > report.max_rel_err || report.worst.is_empty() {
                report.max_rel_err = report.max_rel_err.max(e);
                if e >= report.max_rel_err {
                    report.worst = format!("{name}[{i}]: analytic {a:.6e} vs numeric {numeric:.6e}");
                }
            }
        }
    }
    report.pass = report.max_rel_err < opts.tolerance;
    Ok(report)
}
