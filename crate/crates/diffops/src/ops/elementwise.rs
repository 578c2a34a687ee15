use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::{same_shape, Tensor};

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^x)`, returning `x` itself above 30.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::of(30.0) {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    /// Elementwise map with derivative `df(x, y)`.
    fn unary(self, f: impl Fn(T) -> T, df: impl Fn(T, T) -> T + 'static) -> Self {
        let x = self.value();
        let y = x.map(f);
        let yv = std::sync::Arc::new(y.clone());
        let id = self.id();
        self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for (((a, &gi), &xi), &yi) in acc.iter_mut().zip(g.data()).zip(x.data()).zip(yv.data()) {
                    *a = *a + gi * df(xi, yi);
                }
            })
        })
    }

    pub fn neg(self) -> Self {
        self.unary(|x| -x, |_, _| -T::one())
    }

    pub fn scale(self, c: f64) -> Self {
        let c = T::of(c);
        self.unary(move |x| x * c, move |_, _| c)
    }

    pub fn add_scalar(self, c: f64) -> Self {
        let c = T::of(c);
        self.unary(move |x| x + c, |_, _| T::one())
    }

    pub fn abs(self) -> Self {
        self.unary(|x| x.abs(), |x, _| if x > T::zero() { T::one() } else if x < T::zero() { -T::one() } else { T::zero() })
    }

    pub fn square(self) -> Self {
        self.unary(|x| x * x, |x, _| x + x)
    }

    pub fn exp(self) -> Self {
        self.unary(|x| x.exp(), |_, y| y)
    }

    pub fn ln(self) -> Self {
        self.unary(|x| x.ln(), |x, _| T::one() / x)
    }

    pub fn relu(self) -> Self {
        self.unary(|x| if x > T::zero() { x } else { T::zero() }, |x, _| if x > T::zero() { T::one() } else { T::zero() })
    }

    pub fn leaky_relu(self, slope: f64) -> Self {
        let s = T::of(slope);
        self.unary(move |x| if x > T::zero() { x } else { x * s }, move |x, _| if x > T::zero() { T::one() } else { s })
    }

    pub fn sigmoid(self) -> Self {
        self.unary(sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn tanh(self) -> Self {
        self.unary(|x| x.tanh(), |_, y| T::one() - y * y)
    }

    pub fn softplus(self) -> Self {
        self.unary(softplus, |x, _| sigmoid(x))
    }

    fn binary(
        self,
        other: Self,
        what: &str,
        f: impl Fn(T, T) -> T,
        da: impl Fn(T, T) -> T + 'static,
        db: impl Fn(T, T) -> T + 'static,
    ) -> Result<Self> {
        let (a, b) = (self.value(), other.value());
        same_shape(what, a.shape(), b.shape())?;
        let y = a.zip_map(&b, f);
        let (ia, ib) = (self.id(), other.id());
        Ok(self.derive(&[self, other], y, move |g, grads| {
            grads.add_with(ia, |acc| {
                for (((s, &gi), &x), &z) in acc.iter_mut().zip(g.data()).zip(a.data()).zip(b.data()) {
                    *s = *s + gi * da(x, z);
                }
            });
            grads.add_with(ib, |acc| {
                for (((s, &gi), &x), &z) in acc.iter_mut().zip(g.data()).zip(a.data()).zip(b.data()) {
                    *s = *s + gi * db(x, z);
                }
            });
        }))
    }

    pub fn add(self, other: Self) -> Result<Self> {
        self.binary(other, "add", |a, b| a + b, |_, _| T::one(), |_, _| T::one())
    }

    pub fn sub(self, other: Self) -> Result<Self> {
        self.binary(other, "sub", |a, b| a - b, |_, _| T::one(), |_, _| -T::one())
    }

    pub fn mul(self, other: Self) -> Result<Self> {
        self.binary(other, "mul", |a, b| a * b, |_, b| b, |a, _| a)
    }

    pub fn div(self, other: Self) -> Result<Self> {
        self.binary(other, "div", |a, b| a / b, |_, b| T::one() / b, |a, b| -a / (b * b))
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(self) -> Self {
        let total = self.value().sum();
        let id = self.id();
        self.derive(&[self], Tensor::scalar(total), move |g, grads| {
            let gv = g.data()[0];
            grads.add_with(id, |acc| acc.iter_mut().for_each(|a| *a = *a + gv));
        })
    }

    pub fn mean(self) -> Self {
        let n = self.value().len().max(1);
        self.sum().scale(1.0 / n as f64)
    }

    /// Multiplies every element by a single-element variable.
    pub fn mul_scalar(self, s: Self) -> Result<Self> {
        let (x, sv) = (self.value(), s.value());
        if sv.len() != 1 {
            return Err(DiffError::Shape(format!("mul_scalar needs a single-element factor, got {:?}", sv.shape())));
        }
        let c = sv.data()[0];
        let y = x.map(|v| v * c);
        let (ix, is) = (self.id(), s.id());
        Ok(self.derive(&[self, s], y, move |g, grads| {
            grads.add_with(ix, |acc| {
                for (a, &gi) in acc.iter_mut().zip(g.data()) {
                    *a = *a + gi * c;
                }
            });
            if grads.wants(is) {
                let dot = g.data().iter().zip(x.data()).fold(T::zero(), |a, (&gi, &xi)| a + gi * xi);
                grads.add_with(is, |acc| acc[0] = acc[0] + dot);
            }
        }))
    }

    /// Scales sample `b` of a batch-major tensor by `w[b]`; `w` has `B` elements.
    pub fn scale_samples(self, w: Self) -> Result<Self> {
        let (x, wv) = (self.value(), w.value());
        let b = x.shape()[0];
        if wv.len() != b {
            return Err(DiffError::Shape(format!("scale_samples: {} weights for batch {b}", wv.len())));
        }
        let per = x.len() / b.max(1);
        let mut y = (*x).clone();
        for (chunk, &wi) in y.data_mut().chunks_mut(per.max(1)).zip(wv.data()) {
            chunk.iter_mut().for_each(|v| *v = *v * wi);
        }
        let (ix, iw) = (self.id(), w.id());
        Ok(self.derive(&[self, w], y, move |g, grads| {
            grads.add_with(ix, |acc| {
                for ((ac, gc), &wi) in acc.chunks_mut(per).zip(g.data().chunks(per)).zip(wv.data()) {
                    for (a, &gi) in ac.iter_mut().zip(gc) {
                        *a = *a + gi * wi;
                    }
                }
            });
            if grads.wants(iw) {
                grads.add_with(iw, |acc| {
                    for ((a, gc), xc) in acc.iter_mut().zip(g.data().chunks(per)).zip(x.data().chunks(per)) {
                        *a = *a + gc.iter().zip(xc).fold(T::zero(), |s, (&gi, &xi)| s + gi * xi);
                    }
                });
            }
        }))
    }

    /// Same value, no gradient flows back.
    pub fn detach(self) -> Self {
        self.tape().constant_rc(self.value())
    }
}
