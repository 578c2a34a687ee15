use atmos_diffops::{Ctx, DiffError, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

use crate::discriminator::Discriminator;
use crate::error::{ModelError, Result};

/// Non-saturating generator loss, `mean softplus(-D(fake))`.
pub fn generator_adversarial<'t, T: Scalar>(fake_logits: Var<'t, T>) -> Var<'t, T> {
    fake_logits.neg().softplus().mean()
}

/// Logistic critic loss, `mean softplus(-D(real)) + mean softplus(D(fake))`.
pub fn discriminator_adversarial<'t, T: Scalar>(real_logits: Var<'t, T>, fake_logits: Var<'t, T>) -> Result<Var<'t, T>> {
    Ok(real_logits.neg().softplus().mean().add(fake_logits.softplus().mean())?)
}

/// R1 value and its gradient with respect to the critic parameters.
#[derive(Debug, Clone)]
pub struct R1Penalty<T> {
    pub value: f64,
    pub param_grads: Vec<(ParamId, Tensor<T>)>,
}

/// Largest input displacement used for the mixed second derivative.
pub const R1_PROBE: f64 = 1e-3;

fn input_gradient<T: Scalar, F>(store: &ParamStore<T>, x: &Tensor<T>, critic: &F) -> Result<Tensor<T>>
where
    F: for<'t> Fn(&Ctx<'t, T>, Var<'t, T>) -> Result<Var<'t, T>>,
{
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store).frozen();
    let xv = tape.var(x.clone());
    let s = critic(&ctx, xv)?.sum();
    let grads = tape.backward(s)?;
    Ok(grads.get(xv).cloned().unwrap_or_else(|| Tensor::zeros(x.shape())))
}

fn param_gradient<T: Scalar, F>(store: &ParamStore<T>, x: Tensor<T>, critic: &F) -> Result<Vec<(ParamId, Tensor<T>)>>
where
    F: for<'t> Fn(&Ctx<'t, T>, Var<'t, T>) -> Result<Var<'t, T>>,
{
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store);
    let s = critic(&ctx, tape.constant(x))?.sum();
    let grads = tape.backward(s)?;
    Ok(ctx.param_grads(&grads))
}

/// `(gamma / 2) * mean_b |d(sum of logits)/d x_b|^2` on real inputs.
///
/// The parameter gradient needs a mixed second derivative; it is taken as a
/// central difference of the parameter gradient along the input gradient,
/// `(gamma / B) [g(x + e v) - g(x - e v)] / 2e` with `v` the input gradient
/// and `e` chosen so the largest displacement is [`R1_PROBE`].
pub fn r1_penalty<T: Scalar, F>(store: &ParamStore<T>, x: &Tensor<T>, gamma: f64, critic: F) -> Result<R1Penalty<T>>
where
    F: for<'t> Fn(&Ctx<'t, T>, Var<'t, T>) -> Result<Var<'t, T>>,
{
    let batch = x.shape().first().copied().unwrap_or(0);
    if batch == 0 {
        return Err(DiffError::Shape("R1 needs a non-empty batch".into()).into());
    }
    let g = input_gradient(store, x, &critic)?;
    let sq: f64 = g.data().iter().map(|v| v.f64() * v.f64()).sum();
    let value = 0.5 * gamma * sq / batch as f64;
    if !value.is_finite() {
        let index = g.data().iter().position(|v| !v.f64().is_finite()).unwrap_or(0);
        return Err(ModelError::NonFinite { term: "r1".into(), index, detail: format!("penalty {value}") });
    }
    let peak = g.data().iter().fold(0.0f64, |m, v| m.max(v.f64().abs()));
    if gamma == 0.0 || peak == 0.0 {
        return Ok(R1Penalty { value, param_grads: Vec::new() });
    }
    let eps = R1_PROBE / peak;
    let shifted = |sign: f64| x.zip_map(&g, |xi, gi| T::of(xi.f64() + sign * eps * gi.f64()));
    let plus = param_gradient(store, shifted(1.0), &critic)?;
    let minus = param_gradient(store, shifted(-1.0), &critic)?;
    let c = gamma / batch as f64 / (2.0 * eps);
    let param_grads = plus
        .into_iter()
        .zip(minus)
        .map(|((id, p), (id2, m))| {
            debug_assert_eq!(id, id2);
            (id, p.zip_map(&m, |a, b| T::of(c * (a.f64() - b.f64()))))
        })
        .collect();
    Ok(R1Penalty { value, param_grads })
}

/// R1 for the conditional critic; only the image channel is differentiated.
pub fn discriminator_r1<T: Scalar>(
    disc: &Discriminator,
    store: &ParamStore<T>,
    real: &Tensor<T>,
    mask: &Tensor<T>,
    atb_masked: &Tensor<T>,
    gamma: f64,
) -> Result<R1Penalty<T>> {
    r1_penalty(store, real, gamma, |ctx, x| {
        let tape = ctx.tape();
        Ok(disc.forward(ctx, x, tape.constant(mask.clone()), tape.constant(atb_masked.clone()))?.logits)
    })
}

/// Mean over layers of the mean absolute feature difference; real features
/// are treated as constants.
pub fn feature_matching<'t, T: Scalar>(real: &[Var<'t, T>], fake: &[Var<'t, T>]) -> Result<Var<'t, T>> {
    if real.len() != fake.len() || real.is_empty() {
        return Err(DiffError::Shape(format!("feature lists of length {} and {}", real.len(), fake.len())).into());
    }
    let mut acc: Option<Var<'t, T>> = None;
    for (r, f) in real.iter().zip(fake) {
        let term = f.sub(r.detach())?.abs().mean();
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    Ok(acc.expect("non-empty").scale(1.0 / real.len() as f64))
}
