use std::str::FromStr;

use crate::error::{DiffError, Result};
use crate::ops::ConvSpec;
use crate::params::{Ctx, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub spec: ConvSpec,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: (usize, usize),
}

impl Conv2d {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: (usize, usize),
        spec: ConvSpec,
        bias: bool,
    ) -> Result<Self> {
        let fan_in = in_ch * kernel.0 * kernel.1;
        let weight = store.add_fan_in(&format!("{name}.weight"), &[out_ch, in_ch, kernel.0, kernel.1], fan_in)?;
        let bias = if bias { Some(store.add_fan_in(&format!("{name}.bias"), &[out_ch], fan_in)?) } else { None };
        Ok(Self { weight, bias, spec, in_ch, out_ch, kernel })
    }

    /// 3x3, stride 1, padding 1, with bias.
    pub fn same3<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        Self::new(store, name, in_ch, out_ch, (3, 3), ConvSpec::new(1, 1), true)
    }

    /// 1x1 with bias.
    pub fn pointwise<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        Self::new(store, name, in_ch, out_ch, (1, 1), ConvSpec::default(), true)
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.conv2d(ctx.param(self.weight), self.bias.map(|b| ctx.param(b)), self.spec)
    }

    pub fn params(&self) -> Vec<ParamId> {
        std::iter::once(self.weight).chain(self.bias).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_features: usize,
    pub out_features: usize,
}

impl Linear {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_features: usize, out_features: usize) -> Result<Self> {
        let weight = store.add_fan_in(&format!("{name}.weight"), &[out_features, in_features], in_features)?;
        let bias = store.add_fan_in(&format!("{name}.bias"), &[out_features], in_features)?;
        Ok(Self { weight, bias, in_features, out_features })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.linear(ctx.param(self.weight), Some(ctx.param(self.bias)))
    }
}

#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub scale: ParamId,
    pub shift: ParamId,
    pub eps: f64,
}

impl InstanceNorm {
    pub const EPS: f64 = 1e-5;

    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, ch: usize) -> Result<Self> {
        let scale = store.add_constant(&format!("{name}.scale"), &[ch], 1.0)?;
        let shift = store.add_constant(&format!("{name}.shift"), &[ch], 0.0)?;
        Ok(Self { scale, shift, eps: Self::EPS })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        x.instance_norm(ctx.param(self.scale), ctx.param(self.shift), self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointwiseKind {
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Softplus,
    GlobalAvgPool,
    FullyConnected,
}

impl PointwiseKind {
    pub const ALL: [PointwiseKind; 7] = [
        Self::Relu,
        Self::LeakyRelu,
        Self::Sigmoid,
        Self::Tanh,
        Self::Softplus,
        Self::GlobalAvgPool,
        Self::FullyConnected,
    ];
    pub const LEAKY_SLOPE: f64 = 0.2;

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::LeakyRelu => "leaky_relu",
            Self::Sigmoid => "sigmoid",
            Self::Tanh => "tanh",
            Self::Softplus => "softplus",
            Self::GlobalAvgPool => "gap",
            Self::FullyConnected => "fc",
        }
    }
}

impl FromStr for PointwiseKind {
    type Err = DiffError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| DiffError::Config(format!("unknown pointwise kind {s:?}")))
    }
}

/// Applies one of the parameter-free maps, or `fc` for [`PointwiseKind::FullyConnected`].
pub fn pointwise<'t, T: Scalar>(
    ctx: &Ctx<'t, T>,
    x: Var<'t, T>,
    kind: PointwiseKind,
    fc: Option<&Linear>,
) -> Result<Var<'t, T>> {
    Ok(match kind {
        PointwiseKind::Relu => x.relu(),
        PointwiseKind::LeakyRelu => x.leaky_relu(PointwiseKind::LEAKY_SLOPE),
        PointwiseKind::Sigmoid => x.sigmoid(),
        PointwiseKind::Tanh => x.tanh(),
        PointwiseKind::Softplus => x.softplus(),
        PointwiseKind::GlobalAvgPool => x.global_avg_pool()?,
        PointwiseKind::FullyConnected => {
            let fc = fc.ok_or_else(|| DiffError::Config("fully-connected kind needs a linear layer".into()))?;
            fc.forward(ctx, x)?
        }
    })
}
