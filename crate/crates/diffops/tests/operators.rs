use atmos_diffops::nn::{pointwise, ConvLstm, CrossAttention, FfcBlock, FfcLayer, Gate, PointwiseKind, SpectralUnit};
use atmos_diffops::ops::{irfft2, rfft2, softmax_rows, ConvSpec};
use atmos_diffops::suite::random;
use atmos_diffops::{Ctx, DiffError, ParamStore, Tape, Tensor, Var};
use proptest::prelude::*;

fn run<T: atmos_diffops::Scalar>(
    store: &ParamStore<T>,
    f: impl for<'t> FnOnce(&Ctx<'t, T>) -> atmos_diffops::Result<Var<'t, T>>,
) -> Tensor<T> {
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, store);
    (*f(&ctx).unwrap().value()).clone()
}

#[test]
fn spectral_identity_round_trips() {
    let mut s = ParamStore::<f64>::new(1);
    let su = SpectralUnit::new(&mut s, "su", 3, false).unwrap();
    su.set_identity(&mut s);
    let x = random(&[2, 3, 8, 8], 2);
    let y = run(&s, |ctx| su.forward(ctx, ctx.constant(x.clone())));
    assert!(y.max_abs_diff(&x) < 1e-5);

    let s32 = s.cast::<f32>();
    let x32 = x.cast::<f32>();
    let y32 = run(&s32, |ctx| su.forward(ctx, ctx.constant(x32.clone())));
    assert!(y32.max_abs_diff(&x32) < 1e-5);
}

#[test]
fn spectral_unit_rejects_odd_dims() {
    let mut s = ParamStore::<f64>::new(1);
    let su = SpectralUnit::new(&mut s, "su", 1, true).unwrap();
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, &s);
    let r = su.forward(&ctx, ctx.constant(Tensor::zeros(&[1, 1, 7, 8])));
    assert!(matches!(r, Err(DiffError::Shape(_))));
}

#[test]
fn parseval_on_random_plane() {
    let x = random(&[1, 1, 8, 8], 3);
    let y = rfft2(&x).unwrap();
    let (re, im) = y.data().split_at(8 * 5);
    let mut energy = 0.0;
    for k in 0..re.len() {
        let v = k % 5;
        let m = if v == 0 || v == 4 { 1.0 } else { 2.0 };
        energy += m * (re[k] * re[k] + im[k] * im[k]);
    }
    let signal: f64 = x.data().iter().map(|v| v * v).sum();
    assert!((energy - signal).abs() / signal < 1e-5);
}

#[test]
fn ffc_block_shapes_and_split_errors() {
    let mut s = ParamStore::<f32>::new(4);
    let block = FfcBlock::new(&mut s, "b", 64, 128, 0.5).unwrap();
    let x = random(&[1, 64, 32, 32], 5).cast::<f32>();
    let y = run(&s, |ctx| block.forward(ctx, ctx.constant(x.clone())));
    assert_eq!(y.shape(), &[1, 128, 32, 32]);
    assert!(y.all_finite());

    let mut s = ParamStore::<f64>::new(4);
    assert!(matches!(FfcLayer::new(&mut s, "odd", 7, 8, 0.5), Err(DiffError::Config(_))));
    assert!(matches!(FfcBlock::new(&mut s, "odd2", 8, 6, 0.25), Err(DiffError::Config(_))));
}

fn plain_layer<'t>(ctx: &Ctx<'t, f64>, store: &ParamStore<f64>, v: Var<'t, f64>, l: &str) -> atmos_diffops::Result<Var<'t, f64>> {
    let p = |n: String| ctx.param(store.id_of(&n).unwrap());
    let c = v.conv2d(p(format!("b.{l}.l2l.weight")), Some(p(format!("b.{l}.l2l.bias"))), ConvSpec::new(1, 1))?;
    Ok(c.instance_norm(p(format!("b.{l}.norm_l.scale")), p(format!("b.{l}.norm_l.shift")), 1e-5)?.relu())
}

#[test]
fn ffc_block_without_global_branch_is_two_convs_and_a_residual() {
    let mut s = ParamStore::<f64>::new(6);
    let block = FfcBlock::new(&mut s, "b", 4, 4, 0.0).unwrap();
    assert!(!block.layer1.has_spectral_path() && !block.layer2.has_spectral_path());
    assert!(block.skip.is_none());
    let x = random(&[1, 4, 6, 6], 7);
    let y = run(&s, |ctx| block.forward(ctx, ctx.constant(x.clone())));
    // Same computation from named parameters: conv3x3 -> norm -> relu, twice, plus input.
    let want = run(&s, |ctx| {
        let xin = ctx.constant(x.clone());
        plain_layer(ctx, &s, plain_layer(ctx, &s, xin, "layer1")?, "layer2")?.add(xin)
    });
    assert_eq!(y, want);
    assert!(s.params().iter().all(|p| !p.name.contains("g2g") && !p.name.contains("spectral")));
}

#[test]
fn convlstm_zero_input_zero_bias_is_zero() {
    let mut s = ParamStore::<f64>::new(8);
    let lstm = ConvLstm::new(&mut s, "l", 3, 5, 3).unwrap();
    s.fill(lstm.input_conv.bias.unwrap(), 0.0);
    let y = run(&s, |ctx| lstm.forward(ctx, ctx.constant(Tensor::zeros(&[2, 3, 6, 4]))));
    assert_eq!(y.shape(), &[2, 5, 6, 4]);
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn convlstm_single_step_matches_cell() {
    let mut s = ParamStore::<f64>::new(9);
    let lstm = ConvLstm::new(&mut s, "l", 2, 3, 3).unwrap();
    let x = random(&[1, 2, 5, 1], 10);
    let y = run(&s, |ctx| lstm.forward(ctx, ctx.constant(x.clone())));
    // One LSTM step from zero state: c = i * g, h = o * tanh(c).
    let gates = atmos_diffops::ops::conv2d_forward(
        &x,
        s.value(lstm.input_conv.weight),
        Some(s.value(lstm.input_conv.bias.unwrap())),
        lstm.input_conv.spec,
    )
    .unwrap();
    let g = gates.data();
    let n = 3 * 5;
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    for k in 0..n {
        let (i, o, cand) = (sig(g[k]), sig(g[2 * n + k]), g[3 * n + k].tanh());
        let want = o * (i * cand).tanh();
        assert!((y.data()[k] - want).abs() < 1e-12);
    }
}

#[test]
fn cross_attention_properties() {
    let mut s = ParamStore::<f64>::new(11);
    let attn = CrossAttention::new(&mut s, "a", 8, 16, 4).unwrap();
    let q = random(&[1, 8, 4, 4], 12);
    let c = random(&[1, 16, 2, 2], 13);
    let y = run(&s, |ctx| attn.forward(ctx, ctx.constant(q.clone()), ctx.constant(c.clone())));
    assert_eq!(y, q, "zero gate must be the identity");

    s.fill(attn.gate, 0.7);
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, &s);
    let (out, w) = attn.forward_with_weights(&ctx, ctx.constant(q.clone()), ctx.constant(c.clone())).unwrap();
    assert_eq!(out.shape(), q.shape());
    let w = w.value();
    assert_eq!(w.shape(), &[4, 16, 4]);
    for row in w.data().chunks(4) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    let single = random(&[1, 16, 1, 1], 14);
    let (_, w) = attn.forward_with_weights(&ctx, ctx.constant(q.clone()), ctx.constant(single)).unwrap();
    assert!(w.value().data().iter().all(|&v| v == 1.0));

    assert!(matches!(CrossAttention::new(&mut s, "bad", 6, 8, 4), Err(DiffError::Config(_))));
    assert!(matches!(CrossAttention::new(&mut s, "bad2", 8, 6, 4), Err(DiffError::Config(_))));
}

#[test]
fn gate_closed_forms_and_noise() {
    assert_eq!(softmax_rows(&[0.0f64, 0.0], 2), vec![0.5, 0.5]);
    let mut s = ParamStore::<f64>::new(15);
    let gate = Gate::new(&mut s, "g", 4, 8, 2).unwrap();
    s.fill(gate.fc.weight, 0.0);
    s.set(gate.fc.bias, Tensor::from_f64(&[2], &[2f64.ln(), 0.0]).unwrap()).unwrap();
    let e = random(&[3, 4, 4, 4], 16);
    let w = run(&s, |ctx| gate.forward(ctx, ctx.constant(e.clone())));
    for row in w.data().chunks(2) {
        assert!((row[0] - 2.0 / 3.0).abs() < 1e-9 && (row[1] - 1.0 / 3.0).abs() < 1e-9);
    }

    let mut s = ParamStore::<f64>::new(17);
    let gate = Gate::new(&mut s, "g", 4, 8, 3).unwrap();
    let noisy = |seed: u64, sigma: f64| {
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &s).training(seed, sigma);
        let w = gate.forward(&ctx, ctx.constant(e.clone())).unwrap().value();
        (*w).clone()
    };
    assert_eq!(noisy(1, 0.0), noisy(2, 0.0));
    assert_eq!(noisy(1, 0.0), run(&s, |ctx| gate.forward(ctx, ctx.constant(e.clone()))));
    assert_ne!(noisy(1, 0.5), noisy(2, 0.5));
    assert_eq!(noisy(3, 0.5), noisy(3, 0.5));
    assert!(matches!(Gate::new(&mut s, "one", 4, 8, 1), Err(DiffError::Config(_))));
    assert!(matches!(Gate::new(&mut s, "zero", 4, 0, 2), Err(DiffError::Config(_))));
}

#[test]
fn pointwise_kinds() {
    let s = ParamStore::<f64>::new(0);
    let y = run(&s, |ctx| pointwise(ctx, ctx.constant(Tensor::zeros(&[2, 2])), PointwiseKind::Softplus, None));
    assert!(y.data().iter().all(|v| (v - 0.693147).abs() < 1e-6));
    let y = run(&s, |ctx| pointwise(ctx, ctx.constant(Tensor::full(&[2, 3, 4, 4], 1.25)), PointwiseKind::GlobalAvgPool, None));
    assert_eq!(y.shape(), &[2, 3]);
    assert!(y.data().iter().all(|&v| v == 1.25));
    assert!(matches!("swish".parse::<PointwiseKind>(), Err(DiffError::Config(_))));
    assert_eq!("leaky_relu".parse::<PointwiseKind>().unwrap(), PointwiseKind::LeakyRelu);
    let tape = Tape::new();
    let ctx = Ctx::new(&tape, &s);
    assert!(pointwise(&ctx, ctx.constant(Tensor::zeros(&[1, 2])), PointwiseKind::FullyConnected, None).is_err());
}

#[test]
fn forward_is_deterministic() {
    let mut s = ParamStore::<f32>::new(18);
    let block = FfcBlock::new(&mut s, "b", 8, 8, 0.5).unwrap();
    let x = random(&[2, 8, 8, 8], 19).cast::<f32>();
    let a = run(&s, |ctx| block.forward(ctx, ctx.constant(x.clone())));
    let b = run(&s, |ctx| block.forward(ctx, ctx.constant(x.clone())));
    assert_eq!(a, b);
}

proptest! {
    #[test]
    fn conv_output_dims_follow_formula(h in 3usize..12, w in 3usize..12, k in 1usize..4, stride in 1usize..3, pad in 0usize..2, dil in 1usize..3) {
        let x = random(&[1, 2, h, w], 1);
        let wt = random(&[3, 2, k, k], 2);
        let spec = ConvSpec { stride: (stride, stride), padding: (pad, pad), dilation: (dil, dil) };
        let span = dil * (k - 1) + 1;
        match atmos_diffops::ops::conv2d_forward(&x, &wt, None, spec) {
            Ok(y) => {
                prop_assert_eq!(y.shape()[2], (h + 2 * pad - span) / stride + 1);
                prop_assert_eq!(y.shape()[3], (w + 2 * pad - span) / stride + 1);
            }
            Err(_) => prop_assert!(h + 2 * pad < span || w + 2 * pad < span),
        }
    }

    #[test]
    fn rfft_round_trip(h in 1usize..5, w in 1usize..5, seed in any::<u64>()) {
        let x = random(&[1, 2, 2 * h, 2 * w], seed);
        let back = irfft2(&rfft2(&x).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn gate_rows_on_simplex(seed in any::<u64>(), sigma in 0.0f64..2.0) {
        let mut s = ParamStore::<f64>::new(seed);
        let gate = Gate::new(&mut s, "g", 3, 5, 4).unwrap();
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &s).training(seed, sigma);
        let e = random(&[2, 3, 4, 4], seed ^ 1).map(|v| 10.0 * v);
        let w = gate.forward(&ctx, ctx.constant(e)).unwrap().value();
        for row in w.data().chunks(4) {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }
}
