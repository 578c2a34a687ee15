use atmos_diffops::nn::Conv2d;
use atmos_diffops::{ConvSpec, Ctx, DiffError, ParamStore, Scalar, Var};

use crate::config::NetworkConfig;
use crate::error::Result;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Conditional patch critic: five 4x4 convolutions (strides 2, 2, 2, 1, 1,
/// padding 1) over `[image, mask, masked input]`.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub layers: Vec<Conv2d>,
}

/// Patch logits and the four hidden activations.
#[derive(Debug, Clone)]
pub struct DiscOutput<'t, T> {
    pub logits: Var<'t, T>,
    pub features: Vec<Var<'t, T>>,
}

impl Discriminator {
    pub const IN_CHANNELS: usize = 3;
    const STRIDES: [usize; 5] = [2, 2, 2, 1, 1];

    pub fn new<T: Scalar>(store: &mut ParamStore<T>, config: &NetworkConfig) -> Result<Self> {
        let mut widths = vec![Self::IN_CHANNELS];
        widths.extend_from_slice(&config.disc_channels);
        widths.push(1);
        let layers = (0..5)
            .map(|i| {
                let spec = ConvSpec::new(Self::STRIDES[i], 1);
                Conv2d::new(store, &format!("disc.conv{}", i + 1), widths[i], widths[i + 1], (4, 4), spec, true)
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { layers })
    }

    /// Spatial size of the logit map for an `h x w` input, if positive.
    pub fn logit_size(h: usize, w: usize) -> Option<(usize, usize)> {
        let step = |n: usize| Self::STRIDES.iter().try_fold(n, |n, &s| ConvSpec::out_len(n, 4, s, 1, 1));
        Some((step(h)?, step(w)?))
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        image: Var<'t, T>,
        mask: Var<'t, T>,
        atb_masked: Var<'t, T>,
    ) -> Result<DiscOutput<'t, T>> {
        let s = image.shape();
        if s.len() != 4 || s[1] != 1 || mask.shape() != s || atb_masked.shape() != s {
            return Err(DiffError::Shape(format!(
                "critic inputs must share a (B, 1, H, W) shape, got {s:?}, {:?}, {:?}",
                mask.shape(),
                atb_masked.shape()
            ))
            .into());
        }
        if Self::logit_size(s[2], s[3]).is_none() {
            return Err(DiffError::Shape(format!("critic input {}x{} too small for five 4x4 layers", s[2], s[3])).into());
        }
        let mut h = Var::concat_channels(&[image, mask, atb_masked])?;
        let mut features = Vec::with_capacity(4);
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(ctx, h)?;
            if i < 4 {
                h = h.leaky_relu(LEAKY_SLOPE);
                features.push(h);
            }
        }
        Ok(DiscOutput { logits: h, features })
    }
}
