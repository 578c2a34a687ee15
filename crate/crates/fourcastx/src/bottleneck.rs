use atmos_diffops::nn::{Conv2d, ConvLstm, FfcBlock, Gate};
use atmos_diffops::{Ctx, ParamStore, Scalar, Tensor, Var};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::moe::mix_experts;

/// ConvLSTM scan along the along-track (width) axis followed by a 1x1
/// projection back to the input width.
#[derive(Debug, Clone)]
pub struct SequenceExpert {
    pub lstm: ConvLstm,
    pub proj: Conv2d,
}

impl SequenceExpert {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, ch: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            lstm: ConvLstm::new(store, &format!("{name}.lstm"), ch, ch, kernel)?,
            proj: Conv2d::pointwise(store, &format!("{name}.proj"), ch, ch)?,
        })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        Ok(self.proj.forward(ctx, self.lstm.forward(ctx, x)?)?)
    }
}

/// Two-expert mixture at 1/8 resolution: sequence expert and FFC block.
#[derive(Debug, Clone)]
pub struct Bottleneck {
    pub gate: Gate,
    pub sequence: SequenceExpert,
    pub ffc: FfcBlock,
}

impl Bottleneck {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, cfg: &NetworkConfig) -> Result<Self> {
        let c4 = cfg.channels[3];
        Ok(Self {
            gate: Gate::new(store, "mid.gate", c4, cfg.gate_hidden, 2)?,
            sequence: SequenceExpert::new(store, "mid.sequence", c4, cfg.lstm_kernel)?,
            ffc: FfcBlock::new(store, "mid.ffc", c4, c4, cfg.ratio_global)?,
        })
    }

    pub fn experts<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, e3: Var<'t, T>) -> Result<[Var<'t, T>; 2]> {
        Ok([self.sequence.forward(ctx, e3)?, self.ffc.forward(ctx, e3)?])
    }

    /// Mixed output and the `(B, 2)` weights used. `weights` overrides the gate.
    pub fn forward_with<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        e3: Var<'t, T>,
        weights: Option<Tensor<T>>,
    ) -> Result<(Var<'t, T>, Var<'t, T>)> {
        let w = match weights {
            Some(t) => ctx.constant(t),
            None => self.gate.forward(ctx, e3)?,
        };
        Ok((mix_experts(&self.experts(ctx, e3)?, w)?, w))
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, e3: Var<'t, T>) -> Result<Var<'t, T>> {
        Ok(self.forward_with(ctx, e3, None)?.0)
    }
}
