pub mod conv;
pub mod elementwise;
pub mod fft;
pub mod linalg;
mod norm;
mod shape;

pub use conv::{conv2d_forward, ConvSpec};
pub use elementwise::{sigmoid, softplus};
pub use fft::{irfft2, rfft2};
pub use linalg::softmax_rows;
