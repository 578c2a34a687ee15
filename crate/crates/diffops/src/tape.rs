//! Reverse-mode tape. Every operation appends a node holding its value and a
//! closure that maps the node's output gradient onto its inputs' gradients.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &mut Grads<T>)>;

struct Node<T> {
    value: Arc<Tensor<T>>,
    requires_grad: bool,
    backward: Option<BackwardFn<T>>,
}

pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.nodes.borrow().len())
    }
}

/// Handle to a node on a tape.
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}", self.id)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Arc<Tensor<T>>, requires_grad: bool, backward: Option<BackwardFn<T>>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, requires_grad, backward: if requires_grad { backward } else { None } });
        Var { tape: self, id: nodes.len() - 1 }
    }

    /// A leaf that receives a gradient.
    pub fn var(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Arc::new(value), true, None)
    }

    pub fn var_rc(&self, value: Arc<Tensor<T>>) -> Var<'_, T> {
        self.push(value, true, None)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.push(Arc::new(value), false, None)
    }

    pub fn constant_rc(&self, value: Arc<Tensor<T>>) -> Var<'_, T> {
        self.push(value, false, None)
    }

    /// Records an operation computed outside the tape. `backward` receives the
    /// output gradient and must add gradients for those `inputs` that want one.
    pub fn custom<'t>(
        &'t self,
        inputs: &[Var<'t, T>],
        value: Tensor<T>,
        backward: impl Fn(&Tensor<T>, &mut Grads<T>) + 'static,
    ) -> Var<'t, T> {
        let requires_grad = inputs.iter().any(|v| {
            debug_assert!(std::ptr::eq(v.tape, self), "mixing tapes");
            v.requires_grad()
        });
        self.push(Arc::new(value), requires_grad, Some(Box::new(backward)))
    }

    fn value_of(&self, id: usize) -> Arc<Tensor<T>> {
        self.nodes.borrow()[id].value.clone()
    }

    fn requires_grad_of(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Gradients of a single-element `root` with respect to every node.
    pub fn backward(&self, root: Var<'_, T>) -> Result<Grads<T>> {
        let n = root.value().len();
        if n != 1 {
            return Err(DiffError::Shape(format!("backward needs a single-element root, got {n} values")));
        }
        let shape = root.shape();
        self.backward_with(root, Tensor::full(&shape, T::one()))
    }

    /// Vector-Jacobian product: gradients of `<seed, root>`.
    pub fn backward_with(&self, root: Var<'_, T>, seed: Tensor<T>) -> Result<Grads<T>> {
        let nodes = self.nodes.borrow();
        if seed.shape() != nodes[root.id].value.shape() {
            return Err(DiffError::Shape(format!(
                "seed shape {:?} does not match root shape {:?}",
                seed.shape(),
                nodes[root.id].value.shape()
            )));
        }
        let mut grads = Grads {
            grads: (0..nodes.len()).map(|_| None).collect(),
            wants: nodes.iter().map(|n| n.requires_grad).collect(),
            shapes: nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        };
        grads.add(root.id, seed);
        for id in (0..=root.id).rev() {
            if let Some(f) = &nodes[id].backward {
                if let Some(g) = grads.grads[id].take() {
                    f(&g, &mut grads);
                }
            }
        }
        Ok(grads)
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Arc<Tensor<T>> {
        self.tape.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad_of(self.id)
    }

    pub(crate) fn derive(
        &self,
        inputs: &[Var<'t, T>],
        value: Tensor<T>,
        backward: impl Fn(&Tensor<T>, &mut Grads<T>) + 'static,
    ) -> Var<'t, T> {
        self.tape.custom(inputs, value, backward)
    }
}

/// Accumulated gradients indexed by node.
pub struct Grads<T> {
    grads: Vec<Option<Tensor<T>>>,
    wants: Vec<bool>,
    shapes: Vec<Vec<usize>>,
}

impl<T: Scalar> Grads<T> {
    pub fn wants(&self, id: usize) -> bool {
        self.wants[id]
    }

    pub fn add(&mut self, id: usize, g: Tensor<T>) {
        if !self.wants[id] {
            return;
        }
        debug_assert_eq!(g.shape(), &self.shapes[id][..], "gradient shape for node {id}");
        match &mut self.grads[id] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    /// Accumulates in place into a zero-initialised buffer for `id`.
    pub fn add_with(&mut self, id: usize, f: impl FnOnce(&mut [T])) {
        if !self.wants[id] {
            return;
        }
        let shape = &self.shapes[id];
        let acc = self.grads[id].get_or_insert_with(|| Tensor::zeros(shape));
        f(acc.data_mut());
    }

    pub fn get(&self, v: Var<'_, T>) -> Option<&Tensor<T>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Gradient of a leaf, zeros if nothing flowed into it.
    pub fn of(&self, v: Var<'_, T>) -> Tensor<T> {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.id]))
    }

    pub fn take(&mut self, v: Var<'_, T>) -> Tensor<T> {
        self.grads[v.id].take().unwrap_or_else(|| Tensor::zeros(&self.shapes[v.id]))
    }
}
