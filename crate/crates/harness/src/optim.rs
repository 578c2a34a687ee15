//! AdamW and the learning-rate schedules.

use std::collections::BTreeMap;

use atmos_diffops::{ParamId, ParamStore, Tensor};

use crate::config::OptimizerConfig;

#[derive(Debug, Clone)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with decoupled weight decay; moments are kept in f64.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    state: BTreeMap<usize, Moments>,
}

impl AdamW {
    pub fn new(cfg: &OptimizerConfig) -> Self {
        Self { beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps, weight_decay: cfg.weight_decay, t: 0, state: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of every trainable parameter that received a gradient.
    pub fn step(&mut self, store: &mut ParamStore<f32>, grads: &[(ParamId, Tensor<f32>)], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (id, g) in grads {
            if !store.get(*id).trainable {
                continue;
            }
            let st = self.state.entry(id.0).or_insert_with(|| Moments { m: vec![0.0; g.len()], v: vec![0.0; g.len()] });
            let p = store.value_mut(*id).data_mut();
            for (i, (pi, &gi)) in p.iter_mut().zip(g.data()).enumerate() {
                let gi = gi as f64;
                st.m[i] = self.beta1 * st.m[i] + (1.0 - self.beta1) * gi;
                st.v[i] = self.beta2 * st.v[i] + (1.0 - self.beta2) * gi * gi;
                let update = (st.m[i] / bc1) / ((st.v[i] / bc2).sqrt() + self.eps);
                let x = *pi as f64;
                *pi = (x - lr * (update + self.weight_decay * x)) as f32;
            }
        }
    }
}

/// Cosine annealing from `lr` at step 0 to `floor` at `total - 1`.
pub fn cosine_lr(lr: f64, floor: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return lr;
    }
    let frac = (step.min(total - 1)) as f64 / (total - 1) as f64;
    floor + 0.5 * (lr - floor) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Exponential per-epoch decay.
pub fn decayed_lr(lr: f64, rate: f64, epoch: usize) -> f64 {
    lr * rate.powi(epoch as i32)
}
