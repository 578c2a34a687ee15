//! Parameterised building blocks. Each block owns the ids of its parameters in
//! a [`ParamStore`](crate::ParamStore) and runs against a [`Ctx`](crate::Ctx).

mod attention;
mod ffc;
mod gate;
mod layers;
mod lstm;
mod spectral;

pub use attention::CrossAttention;
pub use ffc::{split_channels, FfcBlock, FfcLayer};
pub use gate::Gate;
pub use layers::{pointwise, Conv2d, InstanceNorm, Linear, PointwiseKind};
pub use lstm::ConvLstm;
pub use spectral::SpectralUnit;
