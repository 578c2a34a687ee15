use serde::{Deserialize, Serialize};

use atmos_diffops::{Scalar, Var};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_ev: f64,
    pub lambda_adv: f64,
    pub lambda_hrf: f64,
    pub lambda_fm: f64,
    pub lambda_1: f64,
    pub lambda_mix: f64,
    pub lambda_ev_reg: f64,
    pub r1_gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_ev: 1.0,
            lambda_adv: 1.0,
            lambda_hrf: 5.0,
            lambda_fm: 10.0,
            lambda_1: 10.0,
            lambda_mix: 10.0,
            lambda_ev_reg: 0.01,
            r1_gamma: 10.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            lambda_ev: 0.0,
            lambda_adv: 0.0,
            lambda_hrf: 0.0,
            lambda_fm: 0.0,
            lambda_1: 0.0,
            lambda_mix: 0.0,
            lambda_ev_reg: 0.0,
            r1_gamma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_ev", self.lambda_ev),
            ("lambda_adv", self.lambda_adv),
            ("lambda_hrf", self.lambda_hrf),
            ("lambda_fm", self.lambda_fm),
            ("lambda_1", self.lambda_1),
            ("lambda_mix", self.lambda_mix),
            ("lambda_ev_reg", self.lambda_ev_reg),
            ("r1_gamma", self.r1_gamma),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Unweighted generator terms on the tape.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms<'t, T> {
    pub nll: Var<'t, T>,
    pub ev_reg: Var<'t, T>,
    pub adv: Var<'t, T>,
    pub hrf: Var<'t, T>,
    pub fm: Var<'t, T>,
    pub l1: Var<'t, T>,
    pub mix: Var<'t, T>,
}

/// Unweighted term values and the weighted total, all in f64.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nll: f64,
    pub ev_reg: f64,
    pub adv: f64,
    pub hrf: f64,
    pub fm: f64,
    pub l1: f64,
    pub mix: f64,
    pub total: f64,
}

impl LossReport {
    pub const COLUMNS: [&'static str; 8] = ["nll", "ev_reg", "adv", "hrf", "fm", "l1", "mix", "total"];

    pub fn values(&self) -> [f64; 8] {
        [self.nll, self.ev_reg, self.adv, self.hrf, self.fm, self.l1, self.mix, self.total]
    }

    /// The weighted sum of this report's own terms.
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        w.lambda_ev * (self.nll + w.lambda_ev_reg * self.ev_reg)
            + w.lambda_adv * self.adv
            + w.lambda_hrf * self.hrf
            + w.lambda_fm * self.fm
            + w.lambda_1 * self.l1
            + w.lambda_mix * self.mix
    }
}

fn scalar_of<T: Scalar>(name: &str, v: Var<'_, T>) -> Result<f64> {
    let t = v.value();
    let x = if t.len() == 1 { t.data()[0].f64() } else { f64::NAN };
    if !x.is_finite() {
        return Err(ModelError::NonFinite { term: name.into(), index: 0, detail: format!("value {x} (shape {:?})", t.shape()) });
    }
    Ok(x)
}

/// Weighted generator objective. Terms with zero weight stay out of the
/// differentiated sum; every term must be finite.
pub fn total_generator_loss<'t, T: Scalar>(terms: &GeneratorTerms<'t, T>, w: &LossWeights) -> Result<(Var<'t, T>, LossReport)> {
    let mut report = LossReport {
        nll: scalar_of("nll", terms.nll)?,
        ev_reg: scalar_of("ev_reg", terms.ev_reg)?,
        adv: scalar_of("adv", terms.adv)?,
        hrf: scalar_of("hrf", terms.hrf)?,
        fm: scalar_of("fm", terms.fm)?,
        l1: scalar_of("l1", terms.l1)?,
        mix: scalar_of("mix", terms.mix)?,
        total: 0.0,
    };
    report.total = report.weighted_total(w);
    let parts = [
        (w.lambda_ev, terms.nll),
        (w.lambda_ev * w.lambda_ev_reg, terms.ev_reg),
        (w.lambda_adv, terms.adv),
        (w.lambda_hrf, terms.hrf),
        (w.lambda_fm, terms.fm),
        (w.lambda_1, terms.l1),
        (w.lambda_mix, terms.mix),
    ];
    let mut acc: Option<Var<'t, T>> = None;
    for (lambda, v) in parts {
        if lambda == 0.0 {
            continue;
        }
        let term = v.scale(lambda);
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    let total = acc.unwrap_or_else(|| terms.nll.scale(0.0));
    Ok((total, report))
}
