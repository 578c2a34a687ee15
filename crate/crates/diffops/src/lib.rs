//! Reverse-mode differentiable tensor operators for small convolutional
//! networks on the CPU, generic over `f32` (training) and `f64` (checks).

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod nn;
pub mod ops;
pub mod params;
pub mod scalar;
pub mod suite;
pub mod tape;
pub mod tensor;

pub use error::{DiffError, Result};
pub use ops::ConvSpec;
pub use params::{Ctx, Distribution, InitRecord, Param, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Grads, Tape, Var};
pub use tensor::Tensor;
