use crate::error::{DiffError, Result};
use crate::params::{Ctx, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;

use super::layers::{Conv2d, Linear};

/// Mixture-of-experts router: 1x1 conv, global average pool, optional
/// Gaussian noise on the pooled features during training, fully-connected
/// layer, softmax. Produces `(B, n_experts)` weights.
#[derive(Debug, Clone)]
pub struct Gate {
    pub conv: Conv2d,
    pub fc: Linear,
    pub n_experts: usize,
}

impl Gate {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, hidden: usize, n_experts: usize) -> Result<Self> {
        if hidden == 0 || n_experts < 2 {
            return Err(DiffError::Config(format!("gate needs hidden >= 1 and >= 2 experts, got {hidden}, {n_experts}")));
        }
        Ok(Self {
            conv: Conv2d::pointwise(store, &format!("{name}.conv"), in_ch, hidden)?,
            fc: Linear::new(store, &format!("{name}.fc"), hidden, n_experts)?,
            n_experts,
        })
    }

    /// Pre-softmax scores; noise `N(0, sigma^2)` is added only when the
    /// context is in training mode.
    pub fn logits<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, e: Var<'t, T>, sigma: f64) -> Result<Var<'t, T>> {
        let mut pooled = self.conv.forward(ctx, e)?.global_avg_pool()?;
        if let Some(eps) = ctx.noise(&pooled.shape(), sigma) {
            pooled = pooled.add(ctx.constant(eps))?;
        }
        self.fc.forward(ctx, pooled)
    }

    pub fn forward_with<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, e: Var<'t, T>, sigma: f64) -> Result<Var<'t, T>> {
        self.logits(ctx, e, sigma)?.softmax()
    }

    /// Uses the context's noise level.
    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, e: Var<'t, T>) -> Result<Var<'t, T>> {
        self.forward_with(ctx, e, ctx.gate_sigma())
    }
}
