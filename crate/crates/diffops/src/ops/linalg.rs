use crate::error::{DiffError, Result};
use crate::scalar::{gemm, Scalar};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Row-wise softmax over the last axis of a flat buffer.
pub fn softmax_rows<T: Scalar>(x: &[T], n: usize) -> Vec<T> {
    let mut y = vec![T::zero(); x.len()];
    for (row, out) in x.chunks(n).zip(y.chunks_mut(n)) {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let mut s = T::zero();
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - m).exp();
            s = s + *o;
        }
        out.iter_mut().for_each(|o| *o = *o / s);
    }
    y
}

impl<'t, T: Scalar> Var<'t, T> {
    /// Affine map `x W^T + b` for `x` of shape `(B, in)` and `W` of shape `(out, in)`.
    pub fn linear(self, weight: Self, bias: Option<Self>) -> Result<Self> {
        let (x, wv) = (self.value(), weight.value());
        let (b, n_in, n_out) = match (x.shape(), wv.shape()) {
            ([b, i], [o, i2]) if i == i2 => (*b, *i, *o),
            (xs, ws) => return Err(DiffError::Shape(format!("linear: input {xs:?} vs weight {ws:?}"))),
        };
        let mut y = Tensor::zeros(&[b, n_out]);
        gemm(b, n_in, n_out, x.data(), false, wv.data(), true, y.data_mut(), false);
        let bv = match bias {
            Some(bias) => {
                let bv = bias.value();
                if bv.shape() != [n_out] {
                    return Err(DiffError::Shape(format!("linear bias {:?} for {n_out} outputs", bv.shape())));
                }
                for row in y.data_mut().chunks_mut(n_out) {
                    for (v, &c) in row.iter_mut().zip(bv.data()) {
                        *v = *v + c;
                    }
                }
                Some(bias.id())
            }
            None => None,
        };
        let mut inputs = vec![self, weight];
        inputs.extend(bias);
        let (ix, iw) = (self.id(), weight.id());
        Ok(self.derive(&inputs, y, move |g, grads| {
            if grads.wants(ix) {
                grads.add_with(ix, |acc| gemm(b, n_out, n_in, g.data(), false, wv.data(), false, acc, true));
            }
            if grads.wants(iw) {
                grads.add_with(iw, |acc| gemm(n_out, b, n_in, g.data(), true, x.data(), false, acc, true));
            }
            if let Some(ib) = bv {
                grads.add_with(ib, |acc| {
                    for row in g.data().chunks(n_out) {
                        for (a, &gi) in acc.iter_mut().zip(row) {
                            *a = *a + gi;
                        }
                    }
                });
            }
        }))
    }

    /// Batched matrix product of 3-D tensors with optional transposes of the
    /// per-batch matrices: `(N, m, k) x (N, k, n) -> (N, m, n)`.
    pub fn bmm(self, other: Self, ta: bool, tb: bool) -> Result<Self> {
        let (a, bt) = (self.value(), other.value());
        let (na, ra, ca) = dims3(a.shape())?;
        let (nb, rb, cb) = dims3(bt.shape())?;
        let (m, k) = if ta { (ca, ra) } else { (ra, ca) };
        let (k2, n) = if tb { (cb, rb) } else { (rb, cb) };
        if na != nb || k != k2 {
            return Err(DiffError::Shape(format!(
                "bmm: {:?}{} x {:?}{}",
                a.shape(),
                if ta { "^T" } else { "" },
                bt.shape(),
                if tb { "^T" } else { "" }
            )));
        }
        let batch = na;
        let mut y = Tensor::zeros(&[batch, m, n]);
        for i in 0..batch {
            gemm(m, k, n, &a.data()[i * m * k..], ta, &bt.data()[i * k * n..], tb, &mut y.data_mut()[i * m * n..], false);
        }
        let (ia, ib) = (self.id(), other.id());
        Ok(self.derive(&[self, other], y, move |g, grads| {
            let gd = g.data();
            if grads.wants(ia) {
                grads.add_with(ia, |acc| {
                    for i in 0..batch {
                        let (gi, bi, out) = (&gd[i * m * n..], &bt.data()[i * k * n..], &mut acc[i * m * k..]);
                        if ta {
                            gemm(k, n, m, bi, tb, gi, true, out, true);
                        } else {
                            gemm(m, n, k, gi, false, bi, !tb, out, true);
                        }
                    }
                });
            }
            if grads.wants(ib) {
                grads.add_with(ib, |acc| {
                    for i in 0..batch {
                        let (gi, ai, out) = (&gd[i * m * n..], &a.data()[i * m * k..], &mut acc[i * k * n..]);
                        if tb {
                            gemm(n, m, k, gi, true, ai, ta, out, true);
                        } else {
                            gemm(k, m, n, ai, !ta, gi, false, out, true);
                        }
                    }
                });
            }
        }))
    }

    /// Softmax over the last axis.
    pub fn softmax(self) -> Result<Self> {
        let x = self.value();
        let n = *x.shape().last().ok_or_else(|| DiffError::Shape("softmax of a 0-D tensor".into()))?;
        let y = Tensor::new(x.shape(), softmax_rows(x.data(), n))?;
        let yv = y.clone();
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for ((a, gr), yr) in acc.chunks_mut(n).zip(g.data().chunks(n)).zip(yv.data().chunks(n)) {
                    let dot = gr.iter().zip(yr).fold(T::zero(), |s, (&gi, &yi)| s + gi * yi);
                    for ((ai, &gi), &yi) in a.iter_mut().zip(gr).zip(yr) {
                        *ai = *ai + yi * (gi - dot);
                    }
                }
            })
        }))
    }
}

fn dims3(s: &[usize]) -> Result<(usize, usize, usize)> {
    match s {
        [a, b, c] => Ok((*a, *b, *c)),
        _ => Err(DiffError::Shape(format!("expected a 3-D tensor, got {s:?}"))),
    }
}
