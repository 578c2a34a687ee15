use crate::error::{DiffError, Result};
use crate::params::{Ctx, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;

use super::layers::Conv2d;

/// Multi-head attention from query-map pixels to context-map pixels with a
/// learned output gate: `q + tanh(gate) * attended`, gate initialised to 0.
#[derive(Debug, Clone)]
pub struct CrossAttention {
    pub heads: usize,
    pub channels: usize,
    pub query: Conv2d,
    pub key: Conv2d,
    pub value: Conv2d,
    pub out: Conv2d,
    pub gate: ParamId,
}

impl CrossAttention {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize, context_channels: usize, heads: usize) -> Result<Self> {
        if heads == 0 || channels % heads != 0 || context_channels % heads != 0 {
            return Err(DiffError::Config(format!(
                "{heads} heads do not divide query channels {channels} and context channels {context_channels}"
            )));
        }
        Ok(Self {
            heads,
            channels,
            query: Conv2d::pointwise(store, &format!("{name}.query"), channels, channels)?,
            key: Conv2d::pointwise(store, &format!("{name}.key"), context_channels, channels)?,
            value: Conv2d::pointwise(store, &format!("{name}.value"), context_channels, channels)?,
            out: Conv2d::pointwise(store, &format!("{name}.out"), channels, channels)?,
            gate: store.add_constant(&format!("{name}.gate"), &[1], 0.0)?,
        })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, q: Var<'t, T>, context: Var<'t, T>) -> Result<Var<'t, T>> {
        Ok(self.forward_with_weights(ctx, q, context)?.0)
    }

    /// Output and the attention weights of shape `(B * heads, Nq, Nc)`.
    pub fn forward_with_weights<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        q: Var<'t, T>,
        context: Var<'t, T>,
    ) -> Result<(Var<'t, T>, Var<'t, T>)> {
        let (b, c, hq, wq) = q.value().dims4()?;
        let (bc, _, hc, wc) = context.value().dims4()?;
        if b != bc || c != self.channels {
            return Err(DiffError::Shape(format!(
                "attention: queries ({b}, {c}) vs context batch {bc}, configured for {} channels",
                self.channels
            )));
        }
        let (nh, hd) = (self.heads, self.channels / self.heads);
        let (nq, nc) = (hq * wq, hc * wc);
        let qs = self.query.forward(ctx, q)?.reshape(&[b * nh, hd, nq])?;
        let ks = self.key.forward(ctx, context)?.reshape(&[b * nh, hd, nc])?;
        let vs = self.value.forward(ctx, context)?.reshape(&[b * nh, hd, nc])?;
        let attn = qs.bmm(ks, true, false)?.scale(1.0 / (hd as f64).sqrt()).softmax()?;
        let mixed = vs.bmm(attn, false, true)?.reshape(&[b, c, hq, wq])?;
        let attended = self.out.forward(ctx, mixed)?;
        let out = q.add(attended.mul_scalar(ctx.param(self.gate).tanh())?)?;
        Ok((out, attn))
    }
}
