//! Evidential restoration network: masked attenuated backscatter in,
//! normal-inverse-gamma parameters of the intrinsic backscatter out, plus the
//! conditional patch critic and the loss stack used to train them.

pub mod bottleneck;
pub mod checks;
pub mod config;
pub mod decoder;
pub mod discriminator;
pub mod encoder;
pub mod error;
pub mod generator;
pub mod head;
pub mod moe;
pub mod objectives;

pub use config::NetworkConfig;
pub use discriminator::{DiscOutput, Discriminator};
pub use error::{ModelError, Result};
pub use generator::{Generator, GeneratorTrace};
pub use head::{EvidentialHead, NigPrediction};
pub use objectives::{LossReport, LossWeights};
