//! Generator and critic losses.

mod adversarial;
mod evidential;
mod perceptual;
mod reconstruction;
mod total;

pub use adversarial::{
    discriminator_adversarial, discriminator_r1, feature_matching, generator_adversarial, r1_penalty, R1Penalty, R1_PROBE,
};
pub use evidential::{evidential_nll, evidential_reg, nig_nll, nig_nll_grad};
pub use perceptual::{hrf_perceptual, HrfExtractor, HRF_DILATIONS, HRF_WIDTH};
pub use reconstruction::{l1, physics_mix};
pub use total::{total_generator_loss, GeneratorTerms, LossReport, LossWeights};
