use crate::error::Result;
use crate::params::{Ctx, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;

use super::layers::Conv2d;

/// Real FFT, a 1x1 convolution over interleaved real/imaginary channels, an
/// optional ReLU, and the inverse real FFT. Shape-preserving; needs even H, W.
#[derive(Debug, Clone)]
pub struct SpectralUnit {
    pub channels: usize,
    pub conv: Conv2d,
    pub activation: bool,
}

impl SpectralUnit {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, channels: usize, activation: bool) -> Result<Self> {
        let conv = Conv2d::pointwise(store, &format!("{name}.freq"), 2 * channels, 2 * channels)?;
        Ok(Self { channels, conv, activation })
    }

    /// Identity filter with zero bias.
    pub fn set_identity<T: Scalar>(&self, store: &mut ParamStore<T>) {
        let n = 2 * self.channels;
        let w = store.value_mut(self.conv.weight);
        for (i, v) in w.data_mut().iter_mut().enumerate() {
            *v = if i / n == i % n { T::one() } else { T::zero() };
        }
        if let Some(b) = self.conv.bias {
            store.fill(b, 0.0);
        }
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let spec = self.conv.forward(ctx, x.rfft2()?)?;
        let spec = if self.activation { spec.relu() } else { spec };
        spec.irfft2()
    }
}
