use atmos_diffops::nn::{Conv2d, ConvLstm, FfcBlock, Gate, InstanceNorm};
use atmos_diffops::{ConvSpec, Ctx, DiffError, ParamStore, Scalar, Tensor, Var};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::moe::mix_experts;

/// Multi-scale encoder features: full, 1/2, 1/4 and 1/8 resolution.
#[derive(Debug, Clone, Copy)]
pub struct EncoderFeatures<'t, T> {
    pub e0: Var<'t, T>,
    pub e1: Var<'t, T>,
    pub e2: Var<'t, T>,
    pub e3: Var<'t, T>,
    /// Mixture weights of the 1/2 resolution stage, `(B, 3)`.
    pub gate: Var<'t, T>,
}

/// The plain convolution expert: 3x3 conv, instance norm, ReLU.
#[derive(Debug, Clone)]
pub struct ConvExpert {
    pub conv: Conv2d,
    pub norm: InstanceNorm,
}

impl ConvExpert {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, out_ch: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::same3(store, &format!("{name}.conv"), in_ch, out_ch)?,
            norm: InstanceNorm::new(store, &format!("{name}.norm"), out_ch)?,
        })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        Ok(self.norm.forward(ctx, self.conv.forward(ctx, x)?)?.relu())
    }
}

/// Stride-2 3x3 convolution keeping the channel count.
pub fn downsampler<T: Scalar>(store: &mut ParamStore<T>, name: &str, ch: usize) -> Result<Conv2d> {
    Ok(Conv2d::new(store, name, ch, ch, (3, 3), ConvSpec::new(2, 1), true)?)
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub stem: Conv2d,
    pub down1: Conv2d,
    pub gate: Gate,
    pub conv_expert: ConvExpert,
    pub ffc_expert: FfcBlock,
    pub lstm_expert: ConvLstm,
    pub down2: Conv2d,
    pub stage2: FfcBlock,
    pub down3: Conv2d,
    pub stage3: FfcBlock,
}

impl Encoder {
    pub const N_EXPERTS: usize = 3;

    pub fn new<T: Scalar>(store: &mut ParamStore<T>, cfg: &NetworkConfig) -> Result<Self> {
        let [c1, c2, c3, c4] = cfg.channels;
        let r = cfg.ratio_global;
        Ok(Self {
            stem: Conv2d::same3(store, "enc.stem", 2, c1)?,
            down1: downsampler(store, "enc.down1", c1)?,
            gate: Gate::new(store, "enc.gate", c1, cfg.gate_hidden, Self::N_EXPERTS)?,
            conv_expert: ConvExpert::new(store, "enc.expert_conv", c1, c2)?,
            ffc_expert: FfcBlock::new(store, "enc.expert_ffc", c1, c2, r)?,
            lstm_expert: ConvLstm::new(store, "enc.expert_lstm", c1, c2, cfg.lstm_kernel)?,
            down2: downsampler(store, "enc.down2", c2)?,
            stage2: FfcBlock::new(store, "enc.stage2", c2, c3, r)?,
            down3: downsampler(store, "enc.down3", c3)?,
            stage3: FfcBlock::new(store, "enc.stage3", c3, c4, r)?,
        })
    }

    /// Expert outputs on the downsampled stem features, in gate order
    /// (conv, FFC, ConvLSTM).
    pub fn experts<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, d: Var<'t, T>) -> Result<[Var<'t, T>; 3]> {
        Ok([
            self.conv_expert.forward(ctx, d)?,
            self.ffc_expert.forward(ctx, d)?,
            self.lstm_expert.forward(ctx, d)?,
        ])
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<EncoderFeatures<'t, T>> {
        self.forward_with(ctx, x, None)
    }

    /// `weights` (shape `(B, 3)`) replaces the gate output when given.
    pub fn forward_with<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        x: Var<'t, T>,
        weights: Option<Tensor<T>>,
    ) -> Result<EncoderFeatures<'t, T>> {
        let (_, c, h, w) = x.value().dims4()?;
        if c != 2 || h % 16 != 0 || w % 16 != 0 || h == 0 || w == 0 {
            return Err(DiffError::Shape(format!(
                "encoder input must be (B, 2, H, W) with H, W nonzero multiples of 16, got {:?}",
                x.shape()
            ))
            .into());
        }
        let e0 = self.stem.forward(ctx, x)?;
        let d = self.down1.forward(ctx, e0)?;
        let gate = match weights {
            Some(t) => ctx.constant(t),
            None => self.gate.forward(ctx, d)?,
        };
        let e1 = mix_experts(&self.experts(ctx, d)?, gate)?;
        let e2 = self.stage2.forward(ctx, self.down2.forward(ctx, e1)?)?;
        let e3 = self.stage3.forward(ctx, self.down3.forward(ctx, e2)?)?;
        Ok(EncoderFeatures { e0, e1, e2, e3, gate })
    }
}
