use std::f64::consts::{LN_2, PI};

use atmos_core::rng::CounterRng;
use atmos_diffops::nn::Conv2d;
use atmos_diffops::{ConvSpec, Ctx, ParamStore, Tape, Tensor, Var};
use fourcastx::head::NigPrediction;
use fourcastx::objectives::*;
use fourcastx::ModelError;
use proptest::prelude::*;
use statrs::function::gamma::ln_gamma;

// ---- independent oracle: -ln of the NIG marginal by 2-D Gauss-Legendre ----

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn integrate(rule: &[(f64, f64)], a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let (lo, mid) = (a + p as f64 * w, 0.5 * w);
            rule.iter().map(|&(x, wt)| wt * f(lo + mid * (x + 1.0))).sum::<f64>() * mid
        })
        .sum()
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `-ln ∫∫ N(y | mu, s2) N(mu | gamma, s2/nu) InvGamma(s2 | alpha, beta) dmu ds2`,
/// integrating over mu and ln s2.
fn quadrature_nll(y: f64, gamma: f64, nu: f64, alpha: f64, beta: f64) -> f64 {
    let rule = gauss_legendre(16);
    let centre = (y + nu * gamma) / (1.0 + nu);
    let r2 = (y - gamma).powi(2);
    let lo = (beta / (alpha + 1.0)).ln() - 8.0;
    let hi = (beta + nu * r2 / (2.0 * (1.0 + nu))).ln() + 40.0 / (alpha + 0.5) + 8.0;
    let log_norm = alpha * beta.ln() - ln_gamma(alpha);
    let p = integrate(&rule, lo, hi, 400, |s| {
        let s2 = s.exp();
        let prior = (log_norm - alpha * s - beta / s2).exp();
        let sd = (s2 / (1.0 + nu)).sqrt();
        let inner = integrate(&rule, centre - 12.0 * sd, centre + 12.0 * sd, 8, |mu| {
            normal_pdf(y, mu, s2) * normal_pdf(mu, gamma, s2 / nu)
        });
        prior * inner
    });
    -p.ln()
}

#[test]
fn reference_point_against_quadrature() {
    // gamma = y, nu = 1, alpha = 2, beta = 1:
    // 0.5 ln(pi) - 2 ln 4 + 2.5 ln 4 + ln G(2) - ln G(2.5).
    // ln G(2.5) = ln(3 sqrt(pi) / 4) = 0.284683, giving 0.980829. The often
    // quoted 0.977829 uses ln(4/3) = 0.287682 for ln G(2.5); the quadrature
    // sides with 0.980829.
    let q = quadrature_nll(0.0, 0.0, 1.0, 2.0, 1.0);
    let by_hand = 0.5 * PI.ln() + 0.5 * 4f64.ln() - (0.75 * PI.sqrt()).ln();
    assert!((q - by_hand).abs() < 1e-9, "quadrature {q} vs {by_hand}");
    assert!((q - 0.980829).abs() < 1e-6, "quadrature {q}");
    assert!((q - 0.977829).abs() > 1e-3);
    let closed = nig_nll(0.0, 0.0, 1.0, 2.0, 1.0);
    assert!((closed - q).abs() < 1e-9);
}

#[test]
fn closed_form_matches_quadrature_over_random_draws() {
    let r = CounterRng::new(77);
    let mut worst: f64 = 0.0;
    for k in 0..120u64 {
        let u = |j: u64| r.uniform_at(5 * k + j);
        let (y, g) = (4.0 * u(0) - 2.0, 4.0 * u(1) - 2.0);
        let nu = 0.1 + 9.9 * u(2);
        let alpha = 1.05 + 8.95 * u(3);
        let beta = 0.05 + 4.95 * u(4);
        let d = (nig_nll(y, g, nu, alpha, beta) - quadrature_nll(y, g, nu, alpha, beta)).abs();
        worst = worst.max(d);
        assert!(d < 1e-6, "draw {k}: y={y} g={g} nu={nu} alpha={alpha} beta={beta} diff {d}");
    }
    println!("max |closed - quadrature| = {worst:.3e}");
}

#[test]
fn analytic_partials_match_central_differences() {
    let r = CounterRng::new(78);
    for k in 0..50u64 {
        let u = |j: u64| r.uniform_at(5 * k + j);
        let p = [4.0 * u(1) - 2.0, 0.1 + 5.0 * u(2), 1.1 + 5.0 * u(3), 0.1 + 3.0 * u(4)];
        let y = 4.0 * u(0) - 2.0;
        let g = nig_nll_grad(y, p[0], p[1], p[2], p[3]);
        for i in 0..4 {
            let h = 1e-6;
            let (mut a, mut b) = (p, p);
            a[i] += h;
            b[i] -= h;
            let n = (nig_nll(y, a[0], a[1], a[2], a[3]) - nig_nll(y, b[0], b[1], b[2], b[3])) / (2.0 * h);
            assert!((n - g[i]).abs() < 1e-6 * (1.0 + n.abs()), "param {i}: {} vs {n}", g[i]);
        }
    }
}

fn prediction<'t>(tape: &'t Tape<f64>, shape: &[usize], vals: [f64; 4]) -> NigPrediction<'t, f64> {
    let v = |x: f64| tape.var(Tensor::full(shape, x));
    NigPrediction { gamma: v(vals[0]), nu: v(vals[1]), alpha: v(vals[2]), beta: v(vals[3]) }
}

#[test]
fn nll_value_and_stationarity_on_the_tape() {
    let tape = Tape::new();
    let y = Tensor::full(&[2, 1, 3, 3], 0.4);
    let p = prediction(&tape, &[2, 1, 3, 3], [0.4, 1.0, 2.0, 1.0]);
    let l = evidential_nll(&p, &y).unwrap();
    assert!((l.value().data()[0] - nig_nll(0.0, 0.0, 1.0, 2.0, 1.0)).abs() < 1e-14);
    let grads = tape.backward(l).unwrap();
    assert!(grads.of(p.gamma).data().iter().all(|&g| g == 0.0));
    // Mean over pixels: each partial is divided by the pixel count.
    let want = nig_nll_grad(0.4, 0.4, 1.0, 2.0, 1.0)[1] / 18.0;
    assert!(grads.of(p.nu).data().iter().all(|&g| (g - want).abs() < 1e-15));
}

#[test]
fn nll_reports_the_offending_pixel() {
    let tape = Tape::new();
    let p = NigPrediction {
        gamma: tape.var(Tensor::zeros(&[1, 1, 2, 2])),
        nu: tape.var(Tensor::full(&[1, 1, 2, 2], 1.0)),
        alpha: tape.var(Tensor::full(&[1, 1, 2, 2], 2.0)),
        beta: tape.var(Tensor::new(&[1, 1, 2, 2], vec![1.0, 1.0, -1.0, 1.0]).unwrap()),
    };
    match evidential_nll(&p, &Tensor::zeros(&[1, 1, 2, 2])) {
        Err(ModelError::NonFinite { term, index, detail }) => {
            assert_eq!(term, "evidential_nll");
            assert_eq!(index, 2);
            assert!(detail.contains("beta=-1"));
        }
        other => panic!("{other:?}"),
    }
    assert!(evidential_nll(&p, &Tensor::zeros(&[1, 1, 4, 1])).is_err());
}

#[test]
fn evidential_regulariser_examples() {
    let tape = Tape::new();
    let y = Tensor::full(&[1, 1, 4, 4], 0.3);
    let exact = prediction(&tape, &[1, 1, 4, 4], [0.3, 3.0, 5.0, 1.0]);
    assert_eq!(evidential_reg(&exact, &y).unwrap().value().data()[0], 0.0);
    let off = prediction(&tape, &[1, 1, 4, 4], [1.3, 1.0, 2.0, 1.0]);
    assert!((evidential_reg(&off, &y).unwrap().value().data()[0] - 4.0).abs() < 1e-12);
    let mut last = 0.0;
    for nu in [0.5, 1.0, 2.0, 4.0, 8.0] {
        let p = prediction(&tape, &[1, 1, 4, 4], [0.8, nu, 2.0, 1.0]);
        let v = evidential_reg(&p, &y).unwrap().value().data()[0];
        assert!(v > last);
        last = v;
    }
}

#[test]
fn adversarial_terms() {
    let tape = Tape::<f64>::new();
    let zeros = tape.var(Tensor::zeros(&[2, 1, 3, 3]));
    assert!((generator_adversarial(zeros).value().data()[0] - LN_2).abs() < 1e-15);
    let d = discriminator_adversarial(zeros, zeros).unwrap();
    assert!((d.value().data()[0] - 2.0 * LN_2).abs() < 1e-15);
    let real = tape.var(Tensor::full(&[1, 1, 2, 2], 3.0));
    let fake = tape.var(Tensor::full(&[1, 1, 2, 2], -2.0));
    let want = (1.0 + (-3.0f64).exp()).ln() + (1.0 + (-2.0f64).exp()).ln();
    assert!((discriminator_adversarial(real, fake).unwrap().value().data()[0] - want).abs() < 1e-14);
}

fn linear_critic(store: &mut ParamStore<f64>, h: usize, w: usize) -> Conv2d {
    // A full-size kernel with no padding is a dot product per sample.
    Conv2d::new(store, "lin", 1, 1, (h, w), ConvSpec::default(), true).unwrap()
}

fn constant_critic<'t>(_: &Ctx<'t, f64>, v: Var<'t, f64>) -> fourcastx::Result<Var<'t, f64>> {
    Ok(v.scale(0.0).add_scalar(1.5))
}

fn two_layer<'t>(ctx: &Ctx<'t, f64>, v: Var<'t, f64>, c1: &Conv2d, c2: &Conv2d) -> fourcastx::Result<Var<'t, f64>> {
    Ok(c2.forward(ctx, c1.forward(ctx, v)?.tanh())?)
}

#[test]
fn r1_closed_form_for_linear_and_constant_critics() {
    let (h, w) = (5, 6);
    let mut store = ParamStore::<f64>::new(3);
    let lin = linear_critic(&mut store, h, w);
    let x = Tensor::from_fn(&[3, 1, h, w], |i| (i as f64 * 0.3).sin());
    let a2: f64 = store.value(lin.weight).data().iter().map(|v| v * v).sum();
    let r = r1_penalty(&store, &x, 10.0, |ctx, v| Ok(lin.forward(ctx, v)?)).unwrap();
    assert!((r.value - 5.0 * a2).abs() < 1e-12 * a2.max(1.0), "{} vs {}", r.value, 5.0 * a2);
    // d/da of (gamma/2)|a|^2 is gamma * a; the bias gets nothing.
    let (_, gw) = r.param_grads.iter().find(|(id, _)| *id == lin.weight).unwrap();
    for (g, a) in gw.data().iter().zip(store.value(lin.weight).data()) {
        assert!((g - 10.0 * a).abs() < 1e-6, "{g} vs {}", 10.0 * a);
    }
    let (_, gb) = r.param_grads.iter().find(|(id, _)| *id == lin.bias.unwrap()).unwrap();
    assert!(gb.data()[0].abs() < 1e-9);

    let c = r1_penalty(&store, &x, 10.0, constant_critic).unwrap();
    assert_eq!(c.value, 0.0);
    assert!(c.param_grads.is_empty());
}

#[test]
fn r1_parameter_gradient_matches_differenced_penalty() {
    let mut store = ParamStore::<f64>::new(4);
    let c1 = Conv2d::new(&mut store, "c1", 1, 3, (3, 3), ConvSpec::new(1, 1), true).unwrap();
    let c2 = Conv2d::new(&mut store, "c2", 3, 1, (3, 3), ConvSpec::new(2, 0), true).unwrap();
    let x = Tensor::from_fn(&[2, 1, 7, 7], |i| (i as f64 * 0.71).cos());
    let r = r1_penalty(&store, &x, 4.0, |ctx, v| two_layer(ctx, v, &c1, &c2)).unwrap();
    let value_at = |s: &ParamStore<f64>| r1_penalty(s, &x, 4.0, |ctx, v| two_layer(ctx, v, &c1, &c2)).unwrap().value;
    let mut checked = 0;
    for (id, g) in &r.param_grads {
        for i in (0..g.len()).step_by(3) {
            let mut s = store.clone();
            let h = 1e-5;
            let orig = s.value(*id).data()[i];
            s.value_mut(*id).data_mut()[i] = orig + h;
            let plus = value_at(&s);
            s.value_mut(*id).data_mut()[i] = orig - h;
            let minus = value_at(&s);
            let n = (plus - minus) / (2.0 * h);
            let a = g.data()[i];
            assert!((a - n).abs() <= 1e-4 * a.abs().max(n.abs()).max(1e-3), "{} [{i}]: {a} vs {n}", store.get(*id).name);
            checked += 1;
        }
    }
    assert!(checked >= 20);
}

#[test]
fn feature_matching_examples() {
    let tape = Tape::<f64>::new();
    let real: Vec<_> = (0..3).map(|k| tape.var(Tensor::from_fn(&[1, 2, 3, 3], |i| (i + k) as f64 * 0.1))).collect();
    let same: Vec<_> = real.iter().map(|r| tape.var((*r.value()).clone())).collect();
    assert_eq!(feature_matching(&real, &same).unwrap().value().data()[0], 0.0);
    let plus: Vec<_> = real.iter().map(|r| r.add_scalar(1.0)).collect();
    let fm = feature_matching(&real, &plus).unwrap();
    assert!((fm.value().data()[0] - 1.0).abs() < 1e-15);
    let swapped = feature_matching(&plus, &real).unwrap();
    assert_eq!(fm.value().data()[0], swapped.value().data()[0]);
    // No gradient reaches the real features.
    let fm = feature_matching(&real, &same.iter().map(|s| s.add_scalar(0.5)).collect::<Vec<_>>()).unwrap();
    let g = tape.backward(fm).unwrap();
    assert!(g.get(real[0]).is_none());
    assert!(g.get(same[0]).is_some());
    assert!(feature_matching(&real, &real[..2]).is_err());
}

fn img(seed: u64, n: usize) -> Tensor<f64> {
    let r = CounterRng::new(seed);
    Tensor::from_fn(&[1, 1, n, n], |i| r.uniform_at(i as u64))
}

#[test]
fn hrf_examples() {
    let ex = HrfExtractor::<f64>::new(5).unwrap();
    assert!(ex.store.params().iter().all(|p| !p.trainable));
    assert_eq!(ex.store.n_scalars(), 9 * 32 + 32 + 3 * (9 * 32 * 32 + 32));
    let tape = Tape::new();
    let a = tape.var(img(1, 20));
    assert_eq!(hrf_perceptual(&ex, a, tape.constant(img(1, 20))).unwrap().value().data()[0], 0.0);
    let b = tape.constant(img(2, 20));
    let v1 = hrf_perceptual(&ex, a, b).unwrap().value().data()[0];
    let again = HrfExtractor::<f64>::new(5).unwrap();
    let v2 = hrf_perceptual(&again, a, b).unwrap().value().data()[0];
    assert_eq!(v1, v2);
    let other = HrfExtractor::<f64>::new(6).unwrap();
    assert_ne!(v1, hrf_perceptual(&other, a, b).unwrap().value().data()[0]);
    let restored = HrfExtractor::<f64>::from_bytes(&ex.to_bytes().unwrap()).unwrap();
    assert_eq!(v1, hrf_perceptual(&restored, a, b).unwrap().value().data()[0]);
    assert!(restored.store.params().iter().all(|p| !p.trainable));
    // Only the prediction receives a gradient, the extractor none.
    let g = tape.backward(hrf_perceptual(&ex, a, b).unwrap()).unwrap();
    assert!(g.of(a).data().iter().any(|&v| v != 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn hrf_positive_for_low_frequency_differences(seed in 0u64..1000, amp in 0.05f64..1.0, fx in 0usize..3, fy in 0usize..3) {
        let ex = HrfExtractor::<f64>::new(9).unwrap();
        let base = img(seed, 16);
        let shifted = Tensor::from_fn(&[1, 1, 16, 16], |i| {
            let (r, c) = ((i / 16) as f64, (i % 16) as f64);
            base.data()[i] + amp * (2.0 * PI * (fx as f64 * r + fy as f64 * c) / 16.0).cos()
        });
        let tape = Tape::new();
        let v = hrf_perceptual(&ex, tape.constant(base), tape.constant(shifted)).unwrap().value().data()[0];
        prop_assert!(v > 0.0);
    }
}

#[test]
fn physics_mix_examples() {
    let tape = Tape::<f64>::new();
    let (n, shape) = (8, [1, 1, 8, 8]);
    let y = img(10, n);
    let atb = img(11, n);
    let pred = tape.var(img(12, n));
    let ones = Tensor::full(&shape, 1.0);
    let zeros = Tensor::zeros(&shape);
    let mix1 = physics_mix(pred, &atb, &ones, &y).unwrap().value().data()[0];
    assert_eq!(mix1, l1(pred, &y).unwrap().value().data()[0]);
    assert_eq!(physics_mix(pred, &y, &zeros, &y).unwrap().value().data()[0], 0.0);
    // Left half masked: half the pixels compare the prediction, half the input.
    let half = Tensor::from_fn(&shape, |i| if i % n < n / 2 { 1.0 } else { 0.0 });
    let (mut lp, mut la) = (0.0, 0.0);
    for i in 0..n * n {
        if i % n < n / 2 {
            lp += (pred.value().data()[i] - y.data()[i]).abs();
        } else {
            la += (atb.data()[i] - y.data()[i]).abs();
        }
    }
    let want = 0.5 * (lp / 32.0) + 0.5 * (la / 32.0);
    assert!((physics_mix(pred, &atb, &half, &y).unwrap().value().data()[0] - want).abs() < 1e-14);
    // Gradient only on masked pixels.
    let g = tape.backward(physics_mix(pred, &atb, &half, &y).unwrap()).unwrap().of(pred);
    assert!(g.data().iter().enumerate().all(|(i, &v)| (i % n < n / 2) == (v != 0.0)));
}

fn terms<'t>(tape: &'t Tape<f64>, v: [f64; 7]) -> GeneratorTerms<'t, f64> {
    let s = |x: f64| tape.var(Tensor::scalar(x));
    GeneratorTerms { nll: s(v[0]), ev_reg: s(v[1]), adv: s(v[2]), hrf: s(v[3]), fm: s(v[4]), l1: s(v[5]), mix: s(v[6]) }
}

#[test]
fn total_loss_examples() {
    let tape = Tape::new();
    let t = terms(&tape, [-0.3, 0.7, 0.69, 0.01, 0.2, 0.2, 0.15]);
    let (v, r) = total_generator_loss(&t, &LossWeights::zero()).unwrap();
    assert_eq!((r.total, v.value().data()[0]), (0.0, 0.0));
    let only_l1 = LossWeights { lambda_1: 10.0, ..LossWeights::zero() };
    let (v, r) = total_generator_loss(&t, &only_l1).unwrap();
    assert!((r.total - 2.0).abs() < 1e-15 && (v.value().data()[0] - 2.0).abs() < 1e-15);
    let w = LossWeights::default();
    let (v, r) = total_generator_loss(&t, &w).unwrap();
    let recomputed = 1.0 * (r.nll + 0.01 * r.ev_reg) + r.adv + 5.0 * r.hrf + 10.0 * r.fm + 10.0 * r.l1 + 10.0 * r.mix;
    assert!((r.total - recomputed).abs() < 1e-14);
    assert!((v.value().data()[0] - r.total).abs() < 1e-12);
    assert_eq!(r.values()[7], r.total);
    // Gradient of the weighted sum hits each term with its weight.
    let g = tape.backward(v).unwrap();
    assert_eq!(g.of(t.fm).data()[0], 10.0);
    assert!((g.of(t.ev_reg).data()[0] - 0.01).abs() < 1e-18);
}

#[test]
fn non_finite_terms_and_bad_weights_are_rejected() {
    let tape = Tape::new();
    let t = terms(&tape, [0.1, 0.1, f64::NAN, 0.1, 0.1, 0.1, 0.1]);
    match total_generator_loss(&t, &LossWeights::default()) {
        Err(ModelError::NonFinite { term, .. }) => assert_eq!(term, "adv"),
        other => panic!("{other:?}"),
    }
    let t = terms(&tape, [0.1, 0.1, 0.1, 0.1, 0.1, 0.1, f64::INFINITY]);
    assert!(matches!(total_generator_loss(&t, &LossWeights::zero()), Err(ModelError::NonFinite { term, .. }) if term == "mix"));
    assert!(LossWeights { lambda_hrf: -1.0, ..LossWeights::default() }.validate().is_err());
    LossWeights::default().validate().unwrap();
}
