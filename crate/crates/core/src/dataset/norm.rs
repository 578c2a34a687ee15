use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, Result};

/// Log-domain min-max normalization bounds, m^-1 sr^-1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub log_floor: f64,
    pub log_ceil: f64,
}

impl Default for NormSpec {
    fn default() -> Self {
        Self { log_floor: 1e-8, log_ceil: 1e-3 }
    }
}

impl NormSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.log_floor > 0.0 && self.log_floor < self.log_ceil && self.log_ceil.is_finite()) {
            return Err(ConfigError::param(
                "norm",
                format!("need 0 < log_floor < log_ceil, got {} / {}", self.log_floor, self.log_ceil),
            ));
        }
        Ok(())
    }

    fn span(&self) -> (f64, f64) {
        let lo = self.log_floor.log10();
        (lo, self.log_ceil.log10() - lo)
    }
}

/// Maps backscatter to `[0, 1]` on a log10 scale, clipping at the bounds.
pub fn normalize(x: f64, spec: &NormSpec) -> f64 {
    let (lo, span) = spec.span();
    ((x.max(spec.log_floor).log10() - lo) / span).clamp(0.0, 1.0)
}

pub fn denormalize(y: f64, spec: &NormSpec) -> f64 {
    let (lo, span) = spec.span();
    10f64.powf(lo + y.clamp(0.0, 1.0) * span)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    #[test]
    fn endpoints_and_midpoint() {
        let s = NormSpec::default();
        assert_eq!(normalize(1e-8, &s), 0.0);
        assert_eq!(normalize(1e-3, &s), 1.0);
        assert!((normalize((1e-8f64 * 1e-3).sqrt(), &s) - 0.5).abs() < 1e-12);
        assert_eq!(normalize(0.0, &s), 0.0);
        assert_eq!(normalize(1.0, &s), 1.0);
    }

    #[test]
    fn round_trip_in_range() {
        let s = NormSpec::default();
        let r = CounterRng::new(4);
        let worst = (0..10_000)
            .map(|i| {
                let x = 10f64.powf(r.uniform_range_at(i, -8.0, -3.0));
                (denormalize(normalize(x, &s), &s) - x).abs() / x
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn monotone() {
        let s = NormSpec::default();
        let xs: Vec<f64> = (0..400).map(|i| 10f64.powf(-10.0 + i as f64 * 0.02)).collect();
        assert!(xs.windows(2).all(|w| normalize(w[0], &s) <= normalize(w[1], &s)));
    }

    #[test]
    fn invalid_bounds() {
        assert!(NormSpec { log_floor: 1e-3, log_ceil: 1e-8 }.validate().is_err());
        assert!(NormSpec { log_floor: 0.0, log_ceil: 1e-3 }.validate().is_err());
    }
}
