use atmos_diffops::nn::Conv2d;
use atmos_diffops::{Ctx, ParamStore, Scalar, Tensor, Var};

use crate::error::Result;

/// Floor added to the evidence and scale channels.
pub const EVIDENCE_FLOOR: f64 = 1e-6;

/// Normal-inverse-gamma parameters per pixel, each `(B, 1, H, W)`.
#[derive(Debug, Clone, Copy)]
pub struct NigPrediction<'t, T> {
    pub gamma: Var<'t, T>,
    pub nu: Var<'t, T>,
    pub alpha: Var<'t, T>,
    pub beta: Var<'t, T>,
}

impl<'t, T: Scalar> NigPrediction<'t, T> {
    /// Expected data variance `beta / (alpha - 1)`.
    pub fn aleatoric(&self) -> Tensor<T> {
        self.alpha.value().zip_map(&self.beta.value(), |a, b| T::of(b.f64() / (a.f64() - 1.0)))
    }

    /// Variance of the mean `beta / (nu (alpha - 1))`.
    pub fn epistemic(&self) -> Tensor<T> {
        let al = self.aleatoric();
        al.zip_map(&self.nu.value(), |v, n| T::of(v.f64() / n.f64()))
    }
}

#[derive(Debug, Clone)]
pub struct EvidentialHead {
    pub conv: Conv2d,
    pub alpha_offset: f64,
}

impl EvidentialHead {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, alpha_offset: f64) -> Result<Self> {
        Ok(Self { conv: Conv2d::same3(store, name, in_ch, 4)?, alpha_offset })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, features: Var<'t, T>) -> Result<NigPrediction<'t, T>> {
        Ok(Self::activate(self.conv.forward(ctx, features)?, self.alpha_offset)?)
    }

    /// Maps raw `(B, 4, H, W)` channels to valid NIG parameters.
    pub fn activate<'t, T: Scalar>(raw: Var<'t, T>, alpha_offset: f64) -> Result<NigPrediction<'t, T>> {
        Ok(NigPrediction {
            gamma: raw.slice_channels(0, 1)?.softplus(),
            nu: raw.slice_channels(1, 1)?.softplus().add_scalar(EVIDENCE_FLOOR),
            // Floored so alpha stays above the offset even where softplus
            // underflows against it.
            alpha: raw.slice_channels(2, 1)?.softplus().add_scalar(-EVIDENCE_FLOOR).relu().add_scalar(EVIDENCE_FLOOR + alpha_offset),
            beta: raw.slice_channels(3, 1)?.softplus().add_scalar(EVIDENCE_FLOOR),
        })
    }
}
