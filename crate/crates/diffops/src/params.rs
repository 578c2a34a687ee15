use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use atmos_core::rng::{derive_key, CounterRng};

use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tape::{Grads, Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Constant { value: f64 },
    Uniform { bound: f64 },
    Normal { std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub seed: u64,
    pub distribution: Distribution,
    pub fan_in: usize,
}

impl InitRecord {
    pub fn materialize<T: Scalar>(&self, shape: &[usize]) -> Tensor<T> {
        let rng = CounterRng::new(self.seed);
        match self.distribution {
            Distribution::Constant { value } => Tensor::full(shape, T::of(value)),
            Distribution::Uniform { bound } => {
                Tensor::from_fn(shape, |i| T::of(rng.uniform_range_at(i as u64, -bound, bound)))
            }
            Distribution::Normal { std } => Tensor::from_fn(shape, |i| T::of(std * rng.normal_at(i as u64))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Arc<Tensor<T>>,
    pub init: InitRecord,
    pub trainable: bool,
}

/// Named parameters with reproducible initialisation.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    seed: u64,
    params: Vec<Param<T>>,
    by_name: HashMap<String, ParamId>,
}

fn name_hash(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl<T: Scalar> ParamStore<T> {
    pub fn new(seed: u64) -> Self {
        Self { seed, params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn add(&mut self, name: &str, shape: &[usize], distribution: Distribution, fan_in: usize) -> Result<ParamId> {
        let init = InitRecord { seed: derive_key(&[self.seed, name_hash(name)]), distribution, fan_in };
        let value = init.materialize(shape);
        self.insert(Param { name: name.to_string(), value: Arc::new(value), init, trainable: true })
    }

    /// Uniform in `+-1/sqrt(fan_in)`.
    pub fn add_fan_in(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        self.add(name, shape, Distribution::Uniform { bound }, fan_in)
    }

    pub fn add_constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<ParamId> {
        self.add(name, shape, Distribution::Constant { value }, 0)
    }

    pub fn insert(&mut self, param: Param<T>) -> Result<ParamId> {
        if self.by_name.contains_key(&param.name) {
            return Err(DiffError::Config(format!("duplicate parameter name {:?}", param.name)));
        }
        let id = ParamId(self.params.len());
        self.by_name.insert(param.name.clone(), id);
        self.params.push(param);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id.0]
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn value(&self, id: ParamId) -> &Arc<Tensor<T>> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.params[id.0].value)
    }

    pub fn set(&mut self, id: ParamId, value: Tensor<T>) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(DiffError::Shape(format!(
                "parameter {}: shape {:?} cannot take {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = Arc::new(value);
        Ok(())
    }

    pub fn fill(&mut self, id: ParamId, value: f64) {
        self.value_mut(id).data_mut().iter_mut().for_each(|v| *v = T::of(value));
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        self.params[id.0].trainable = trainable;
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            seed: self.seed,
            params: self
                .params
                .iter()
                .map(|p| Param { name: p.name.clone(), value: Arc::new(p.value.cast()), init: p.init.clone(), trainable: p.trainable })
                .collect(),
            by_name: self.by_name.clone(),
        }
    }
}

struct Noise {
    rng: CounterRng,
    counter: Cell<u64>,
    sigma: f64,
}

/// Binds a snapshot of a parameter store to a tape for one forward/backward
/// pass. Only the tape is borrowed, so a pass may mix several stores.
pub struct Ctx<'t, T: Scalar> {
    tape: &'t Tape<T>,
    values: Vec<(Arc<Tensor<T>>, bool)>,
    leaves: RefCell<Vec<Option<Var<'t, T>>>>,
    track: bool,
    noise: Option<Noise>,
}

impl<'t, T: Scalar> Ctx<'t, T> {
    /// Inference mode: no gate noise, parameters receive gradients.
    pub fn new(tape: &'t Tape<T>, store: &ParamStore<T>) -> Self {
        let values = store.params.iter().map(|p| (p.value.clone(), p.trainable)).collect();
        Self { tape, values, leaves: RefCell::new(vec![None; store.len()]), track: true, noise: None }
    }

    /// Training mode with gate noise `N(0, sigma^2)` drawn from a counter stream keyed by `seed`.
    pub fn training(mut self, seed: u64, sigma: f64) -> Self {
        self.noise = Some(Noise { rng: CounterRng::new(seed), counter: Cell::new(0), sigma });
        self
    }

    /// Parameters enter the tape as constants and collect no gradients.
    pub fn frozen(mut self) -> Self {
        self.track = false;
        self
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn is_training(&self) -> bool {
        self.noise.is_some()
    }

    pub fn gate_sigma(&self) -> f64 {
        self.noise.as_ref().map_or(0.0, |n| n.sigma)
    }

    pub fn param(&self, id: ParamId) -> Var<'t, T> {
        if let Some(v) = self.leaves.borrow()[id.0] {
            return v;
        }
        let (value, trainable) = &self.values[id.0];
        let v = if self.track && *trainable {
            self.tape.var_rc(value.clone())
        } else {
            self.tape.constant_rc(value.clone())
        };
        self.leaves.borrow_mut()[id.0] = Some(v);
        v
    }

    pub fn constant(&self, value: Tensor<T>) -> Var<'t, T> {
        self.tape.constant(value)
    }

    /// Standard-normal draws scaled by `sigma`, or `None` outside training or when `sigma == 0`.
    pub fn noise(&self, shape: &[usize], sigma: f64) -> Option<Tensor<T>> {
        let n = self.noise.as_ref()?;
        if sigma == 0.0 {
            return None;
        }
        let start = n.counter.get();
        let len: usize = shape.iter().product();
        n.counter.set(start + len as u64);
        Some(Tensor::from_fn(shape, |i| T::of(sigma * n.rng.normal_at(start + i as u64))))
    }

    /// Gradients of every parameter used in this pass that received one.
    pub fn param_grads(&self, grads: &Grads<T>) -> Vec<(ParamId, Tensor<T>)> {
        self.leaves
            .borrow()
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.and_then(|v| grads.get(v).map(|g| (ParamId(i), g.clone()))))
            .collect()
    }

    /// Parameters touched by this pass.
    pub fn used_params(&self) -> Vec<ParamId> {
        self.leaves.borrow().iter().enumerate().filter_map(|(i, v)| v.map(|_| ParamId(i))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_reproducible_and_names_unique() {
        let mut a = ParamStore::<f64>::new(5);
        let mut b = ParamStore::<f64>::new(5);
        let ia = a.add_fan_in("conv.weight", &[4, 3, 3, 3], 27).unwrap();
        let ib = b.add_fan_in("conv.weight", &[4, 3, 3, 3], 27).unwrap();
        assert_eq!(a.value(ia), b.value(ib));
        let bound = 1.0 / 27f64.sqrt();
        assert!(a.value(ia).data().iter().all(|v| v.abs() <= bound));
        assert!(matches!(a.add_constant("conv.weight", &[1], 0.0), Err(DiffError::Config(_))));
        let other = a.add_fan_in("conv2.weight", &[4, 3, 3, 3], 27).unwrap();
        assert_ne!(a.value(ia), a.value(other));
        assert_eq!(a.get(ia).init.materialize::<f64>(&[4, 3, 3, 3]), **a.value(ia));
    }

    #[test]
    fn frozen_context_tracks_nothing() {
        let mut s = ParamStore::<f64>::new(1);
        let id = s.add_constant("w", &[2], 3.0).unwrap();
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &s).frozen();
        let y = ctx.param(id).square().sum();
        assert!(!y.requires_grad());
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &s);
        let y = ctx.param(id).square().sum();
        let g = tape.backward(y).unwrap();
        let pg = ctx.param_grads(&g);
        assert_eq!(pg.len(), 1);
        assert_eq!(pg[0].1.data(), &[6.0, 6.0]);
    }

    #[test]
    fn noise_only_in_training() {
        let s = ParamStore::<f64>::new(1);
        let tape = Tape::new();
        assert!(Ctx::new(&tape, &s).noise(&[3], 0.1).is_none());
        let ctx = Ctx::new(&tape, &s).training(9, 0.1);
        assert!(ctx.noise(&[3], 0.0).is_none());
        let a = ctx.noise(&[3], 0.1).unwrap();
        let b = ctx.noise(&[3], 0.1).unwrap();
        assert_ne!(a, b);
        let again = Ctx::new(&tape, &s).training(9, 0.1).noise(&[3], 0.1).unwrap();
        assert_eq!(a, again);
    }
}
