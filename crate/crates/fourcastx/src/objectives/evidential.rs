use std::f64::consts::PI;

use statrs::function::gamma::{digamma, ln_gamma};

use atmos_diffops::{DiffError, Scalar, Tensor, Var};

use crate::error::{ModelError, Result};
use crate::head::NigPrediction;

/// Per-pixel negative log marginal likelihood of `y` under NIG(γ, ν, α, β),
/// i.e. a Student-t with 2α degrees of freedom.
pub fn nig_nll(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64) -> f64 {
    let omega = 2.0 * beta * (1.0 + nu);
    let r = y - gamma;
    0.5 * (PI / nu).ln() - alpha * omega.ln() + (alpha + 0.5) * (nu * r * r + omega).ln() + ln_gamma(alpha)
        - ln_gamma(alpha + 0.5)
}

/// Partial derivatives of [`nig_nll`] with respect to (γ, ν, α, β).
pub fn nig_nll_grad(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64) -> [f64; 4] {
    let omega = 2.0 * beta * (1.0 + nu);
    let r = y - gamma;
    let a = nu * r * r + omega;
    let ah = alpha + 0.5;
    [
        -ah * 2.0 * nu * r / a,
        -0.5 / nu - 2.0 * alpha * beta / omega + ah * (r * r + 2.0 * beta) / a,
        a.ln() - omega.ln() + digamma(alpha) - digamma(ah),
        -alpha / beta + ah * 2.0 * (1.0 + nu) / a,
    ]
}

fn check_shapes<T: Scalar>(pred: &NigPrediction<'_, T>, y: &Tensor<T>) -> Result<()> {
    let s = pred.gamma.shape();
    for (name, v) in [("nu", pred.nu), ("alpha", pred.alpha), ("beta", pred.beta)] {
        if v.shape() != s {
            return Err(DiffError::Shape(format!("{name} {:?} vs gamma {s:?}", v.shape())).into());
        }
    }
    if y.shape() != s.as_slice() {
        return Err(DiffError::Shape(format!("target {:?} vs prediction {s:?}", y.shape())).into());
    }
    Ok(())
}

/// Mean evidential negative log-likelihood over all pixels. Computed in f64
/// and recorded as one fused tape node.
pub fn evidential_nll<'t, T: Scalar>(pred: &NigPrediction<'t, T>, y: &Tensor<T>) -> Result<Var<'t, T>> {
    check_shapes(pred, y)?;
    let vals = [pred.gamma.value(), pred.nu.value(), pred.alpha.value(), pred.beta.value()];
    let n = y.len();
    let at = |i: usize| (y.data()[i].f64(), vals[0].data()[i].f64(), vals[1].data()[i].f64(), vals[2].data()[i].f64(), vals[3].data()[i].f64());
    let mut total = 0.0;
    for i in 0..n {
        let (yv, g, nu, a, b) = at(i);
        let l = nig_nll(yv, g, nu, a, b);
        if !l.is_finite() {
            return Err(ModelError::NonFinite {
                term: "evidential_nll".into(),
                index: i,
                detail: format!("y={yv} gamma={g} nu={nu} alpha={a} beta={b} -> {l}"),
            });
        }
        total += l;
    }
    let mean = total / n.max(1) as f64;
    let ids = [pred.gamma.id(), pred.nu.id(), pred.alpha.id(), pred.beta.id()];
    let y = y.clone();
    let inputs = [pred.gamma, pred.nu, pred.alpha, pred.beta];
    let tape = pred.gamma.tape();
    Ok(tape.custom(&inputs, Tensor::scalar(T::of(mean)), move |g, grads| {
        let scale = g.data()[0].f64() / n.max(1) as f64;
        let d: Vec<[f64; 4]> = (0..n)
            .map(|i| {
                let v = |k: usize| vals[k].data()[i].f64();
                nig_nll_grad(y.data()[i].f64(), v(0), v(1), v(2), v(3))
            })
            .collect();
        for (k, &id) in ids.iter().enumerate() {
            grads.add_with(id, |acc| {
                for (a, di) in acc.iter_mut().zip(&d) {
                    *a = *a + T::of(scale * di[k]);
                }
            });
        }
    }))
}

/// Mean of `|y - γ| (2ν + α)`: penalises evidence placed on wrong predictions.
pub fn evidential_reg<'t, T: Scalar>(pred: &NigPrediction<'t, T>, y: &Tensor<T>) -> Result<Var<'t, T>> {
    check_shapes(pred, y)?;
    let tape = pred.gamma.tape();
    let resid = pred.gamma.sub(tape.constant(y.clone()))?.abs();
    let evidence = pred.nu.scale(2.0).add(pred.alpha)?;
    Ok(resid.mul(evidence)?.mean())
}
