//! The operator gradient suite: every differentiable primitive and block,
//! checked at `f64` on small random shapes.

use atmos_core::rng::CounterRng;

use crate::gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
use crate::nn::{pointwise, ConvLstm, CrossAttention, FfcBlock, FfcLayer, Gate, InstanceNorm, Linear, PointwiseKind, SpectralUnit};
use crate::ops::ConvSpec;
use crate::params::ParamStore;
use crate::tensor::Tensor;
use crate::Var;

pub fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let r = CounterRng::new(seed);
    Tensor::from_fn(shape, |i| r.uniform_range_at(i as u64, -1.0, 1.0))
}

fn positive(shape: &[usize], seed: u64) -> Tensor<f64> {
    let r = CounterRng::new(seed);
    Tensor::from_fn(shape, |i| r.uniform_range_at(i as u64, 0.5, 2.0))
}

/// Runs the suite; each entry is `(operator, report)`.
pub fn operator_suite(opts: &GradCheckOptions) -> Vec<(String, GradCheckReport)> {
    let mut out = Vec::new();
    let empty = ParamStore::<f64>::new(0);
    let x44 = random(&[2, 3, 4, 4], 1);

    let mut check = |name: &str, store: &ParamStore<f64>, inputs: Vec<Tensor<f64>>, f: &dyn for<'t> Fn(&crate::Ctx<'t, f64>, &[Var<'t, f64>]) -> crate::Result<Var<'t, f64>>| {
        out.push((name.to_string(), grad_check(store, &inputs, f, opts)));
    };

    for kind in [PointwiseKind::Relu, PointwiseKind::LeakyRelu, PointwiseKind::Sigmoid, PointwiseKind::Tanh, PointwiseKind::Softplus, PointwiseKind::GlobalAvgPool] {
        check(kind.name(), &empty, vec![x44.clone()], &move |ctx, x| pointwise(ctx, x[0], kind, None));
    }
    let mut fc_store = ParamStore::new(2);
    let fc = Linear::new(&mut fc_store, "fc", 4, 3).unwrap();
    check("fc", &fc_store, vec![random(&[2, 4], 3)], &|ctx, x| pointwise(ctx, x[0], PointwiseKind::FullyConnected, Some(&fc)));

    check("exp/ln/abs/square", &empty, vec![positive(&[3, 4], 4)], &|_, x| Ok(x[0].exp().add(x[0].ln())?.add(x[0].abs())?.add(x[0].square())?.scale(0.5).add_scalar(1.0)));
    check("add/sub/mul/div", &empty, vec![random(&[3, 4], 5), positive(&[3, 4], 6)], &|_, x| x[0].add(x[1])?.mul(x[0])?.sub(x[1])?.div(x[1]));
    check("mul_scalar", &empty, vec![random(&[2, 5], 7), random(&[1], 8)], &|_, x| x[0].mul_scalar(x[1]));
    check("scale_samples", &empty, vec![random(&[2, 3, 2, 2], 9), random(&[2], 10)], &|_, x| x[0].scale_samples(x[1]));
    check("select_column", &empty, vec![random(&[3, 4], 11)], &|_, x| x[0].select_column(2));
    check("softmax", &empty, vec![random(&[3, 5], 12)], &|_, x| x[0].softmax());
    check("mean", &empty, vec![random(&[3, 5], 13)], &|_, x| Ok(x[0].mean()));
    for (ta, tb) in [(false, false), (true, false), (false, true), (true, true)] {
        let a = if ta { [2, 4, 3] } else { [2, 3, 4] };
        let b = if tb { [2, 5, 4] } else { [2, 4, 5] };
        check(&format!("bmm(ta={ta}, tb={tb})"), &empty, vec![random(&a, 14), random(&b, 15)], &move |_, x| x[0].bmm(x[1], ta, tb));
    }
    check("reshape/concat/slice", &empty, vec![random(&[2, 3, 4, 4], 16), random(&[2, 2, 4, 4], 17)], &|_, x| {
        let c = Var::concat_channels(&[x[0], x[1]])?;
        c.slice_channels(1, 3)?.reshape(&[2, 48])
    });
    check("column/stack", &empty, vec![random(&[2, 3, 4, 3], 18)], &|_, x| Var::stack_columns(&[x[0].column(2)?, x[0].column(0)?]));
    check("upsample_nearest2", &empty, vec![random(&[1, 2, 3, 4], 19)], &|_, x| x[0].upsample_nearest2());

    for (i, (ws, spec)) in [
        ([4, 3, 3, 3], ConvSpec::new(1, 1)),
        ([4, 3, 3, 3], ConvSpec::new(2, 1)),
        ([3, 3, 4, 4], ConvSpec::new(2, 1)),
        ([2, 3, 3, 1], ConvSpec { stride: (1, 1), padding: (1, 0), dilation: (1, 1) }),
        ([2, 3, 3, 3], ConvSpec::dilated(2, 2)),
        ([5, 3, 1, 1], ConvSpec::default()),
    ]
    .into_iter()
    .enumerate()
    {
        let mut s = ParamStore::new(20 + i as u64);
        let fan = ws[1] * ws[2] * ws[3];
        let w = s.add_fan_in("weight", &ws, fan).unwrap();
        let b = s.add_fan_in("bias", &[ws[0]], fan).unwrap();
        let label = format!("conv2d(k={}x{}, stride={}, pad={:?}, dil={})", ws[2], ws[3], spec.stride.0, spec.padding, spec.dilation.0);
        check(&label, &s, vec![random(&[2, 3, 8, 8], 30 + i as u64)], &move |ctx, x| x[0].conv2d(ctx.param(w), Some(ctx.param(b)), spec));
    }

    check("rfft2", &empty, vec![random(&[2, 2, 4, 6], 40)], &|_, x| x[0].rfft2());
    check("irfft2", &empty, vec![random(&[2, 4, 4, 4], 41)], &|_, x| x[0].irfft2());

    let mut s = ParamStore::new(42);
    let norm = InstanceNorm::new(&mut s, "norm", 3).unwrap();
    s.set(norm.scale, random(&[3], 43)).unwrap();
    s.set(norm.shift, random(&[3], 44)).unwrap();
    check("instance_norm", &s, vec![random(&[2, 3, 4, 4], 45)], &|ctx, x| norm.forward(ctx, x[0]));

    let mut s = ParamStore::new(46);
    let su = SpectralUnit::new(&mut s, "spectral", 3, true).unwrap();
    check("spectral_unit", &s, vec![random(&[2, 3, 4, 4], 47)], &|ctx, x| su.forward(ctx, x[0]));

    let mut s = ParamStore::new(48);
    let layer = FfcLayer::new(&mut s, "ffc", 4, 6, 0.5).unwrap();
    check("ffc_layer", &s, vec![random(&[2, 4, 4, 4], 49)], &|ctx, x| layer.forward(ctx, x[0]));

    let mut s = ParamStore::new(50);
    let block = FfcBlock::new(&mut s, "block", 8, 8, 0.5).unwrap();
    check("ffc_block", &s, vec![random(&[1, 8, 8, 8], 51)], &|ctx, x| block.forward(ctx, x[0]));

    let mut s = ParamStore::new(52);
    let lstm = ConvLstm::new(&mut s, "lstm", 4, 3, 3).unwrap();
    check("convlstm_scan", &s, vec![random(&[1, 4, 6, 5], 53)], &|ctx, x| lstm.forward(ctx, x[0]));

    let mut s = ParamStore::new(54);
    let attn = CrossAttention::new(&mut s, "attn", 8, 4, 4).unwrap();
    s.fill(attn.gate, 0.5);
    check("cross_attention", &s, vec![random(&[1, 8, 4, 4], 55), random(&[1, 4, 2, 2], 56)], &|ctx, x| attn.forward(ctx, x[0], x[1]));

    let mut s = ParamStore::new(57);
    let gate = Gate::new(&mut s, "gate", 4, 6, 3).unwrap();
    check("gate_forward", &s, vec![random(&[2, 4, 4, 4], 58)], &|ctx, x| gate.forward(ctx, x[0]));

    out
}
