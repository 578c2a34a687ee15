use atmos_diffops::{Ctx, DiffError, ParamStore, Scalar, Tensor, Var};

use crate::bottleneck::Bottleneck;
use crate::config::NetworkConfig;
use crate::decoder::Decoder;
use crate::encoder::{Encoder, EncoderFeatures};
use crate::error::Result;
use crate::head::{EvidentialHead, NigPrediction};

#[derive(Debug, Clone)]
pub struct Generator {
    pub config: NetworkConfig,
    pub encoder: Encoder,
    pub bottleneck: Bottleneck,
    pub decoder: Decoder,
    pub head: EvidentialHead,
}

/// Everything a forward pass produced, for inspection in tests and logs.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTrace<'t, T> {
    pub features: EncoderFeatures<'t, T>,
    pub bottleneck: Var<'t, T>,
    pub bottleneck_gate: Var<'t, T>,
    pub decoded: Var<'t, T>,
    pub prediction: NigPrediction<'t, T>,
}

impl Generator {
    /// Registers all generator parameters in `store`.
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, config: &NetworkConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            encoder: Encoder::new(store, config)?,
            bottleneck: Bottleneck::new(store, config)?,
            decoder: Decoder::new(store, config)?,
            head: EvidentialHead::new(store, "head", config.channels[0], config.alpha_offset)?,
        })
    }

    /// Stacks masked input and mask into the `(B, 2, H, W)` network input.
    pub fn input<'t, T: Scalar>(atb_masked: Var<'t, T>, mask: Var<'t, T>) -> Result<Var<'t, T>> {
        let (a, m) = (atb_masked.shape(), mask.shape());
        if a != m || a.len() != 4 || a[1] != 1 {
            return Err(DiffError::Shape(format!("input {a:?} and mask {m:?} must both be (B, 1, H, W)")).into());
        }
        Ok(Var::concat_channels(&[atb_masked, mask])?)
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        atb_masked: Var<'t, T>,
        mask: Var<'t, T>,
    ) -> Result<NigPrediction<'t, T>> {
        Ok(self.trace(ctx, atb_masked, mask, None, None)?.prediction)
    }

    /// Full forward pass; gate weights can be pinned for either mixture.
    pub fn trace<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        atb_masked: Var<'t, T>,
        mask: Var<'t, T>,
        encoder_weights: Option<Tensor<T>>,
        bottleneck_weights: Option<Tensor<T>>,
    ) -> Result<GeneratorTrace<'t, T>> {
        let x = Self::input(atb_masked, mask)?;
        let features = self.encoder.forward_with(ctx, x, encoder_weights)?;
        let (bottleneck, bottleneck_gate) = self.bottleneck.forward_with(ctx, features.e3, bottleneck_weights)?;
        let decoded = self.decoder.forward(ctx, bottleneck, [features.e2, features.e1, features.e0])?;
        let prediction = self.head.forward(ctx, decoded)?;
        Ok(GeneratorTrace { features, bottleneck, bottleneck_gate, decoded, prediction })
    }
}
