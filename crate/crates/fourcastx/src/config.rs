use serde::{Deserialize, Serialize};

use atmos_diffops::nn::split_channels;

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Encoder widths at full, 1/2, 1/4 and 1/8 resolution.
    pub channels: [usize; 4],
    pub height: usize,
    pub width: usize,
    pub n_heads: usize,
    /// Hidden width of the expert gates.
    pub gate_hidden: usize,
    /// Gate noise standard deviation at the start of training.
    pub sigma_noise: f64,
    pub ratio_global: f64,
    /// Added to the softplus of the alpha channel so alpha > 1.
    pub alpha_offset: f64,
    pub lstm_kernel: usize,
    pub disc_channels: [usize; 4],
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetworkConfig {
    pub fn full() -> Self {
        Self {
            channels: [64, 128, 256, 512],
            height: 64,
            width: 64,
            n_heads: 4,
            gate_hidden: 64,
            sigma_noise: 0.1,
            ratio_global: 0.5,
            alpha_offset: 1.0,
            lstm_kernel: 3,
            disc_channels: [64, 128, 256, 512],
            seed: 7,
        }
    }

    pub fn desk() -> Self {
        Self { channels: [16, 32, 64, 128], ..Self::full() }
    }

    /// Every block's channel split, head count and spectral size must be valid.
    /// The global branches at 1/8 resolution need even spatial dims, so H and W
    /// must be multiples of 16.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.height == 0 || self.width == 0 || self.height % 16 != 0 || self.width % 16 != 0 {
            return bad(format!(
                "input {}x{} must be a nonzero multiple of 16 (three halvings to an even 1/8 grid)",
                self.height, self.width
            ));
        }
        if self.channels.iter().any(|&c| c == 0) || self.disc_channels.iter().any(|&c| c == 0) {
            return bad("channel widths must be positive".into());
        }
        for &c in &self.channels {
            split_channels(c, self.ratio_global).map_err(|e| ModelError::Config(e.to_string()))?;
            split_channels(2 * c, self.ratio_global).map_err(|e| ModelError::Config(e.to_string()))?;
            if self.n_heads == 0 || c % self.n_heads != 0 {
                return bad(format!("{} heads do not divide {c} channels", self.n_heads));
            }
        }
        if self.gate_hidden == 0 {
            return bad("gate hidden width must be >= 1".into());
        }
        if self.lstm_kernel % 2 == 0 {
            return bad(format!("lstm kernel must be odd, got {}", self.lstm_kernel));
        }
        if !(self.sigma_noise >= 0.0) || !(self.alpha_offset >= 0.0) {
            return bad("sigma_noise and alpha_offset must be non-negative".into());
        }
        Ok(())
    }
}
