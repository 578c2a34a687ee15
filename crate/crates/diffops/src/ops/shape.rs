use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, T: Scalar> Var<'t, T> {
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let x = self.value();
        let y = (*x).clone().reshaped(shape)?;
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for (a, &gi) in acc.iter_mut().zip(g.data()) {
                    *a = *a + gi;
                }
            })
        }))
    }

    /// Concatenates 4-D tensors along channels.
    pub fn concat_channels(parts: &[Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| DiffError::Shape("concat of zero tensors".into()))?;
        let (b, _, h, w) = first.value().dims4()?;
        let mut chans = Vec::with_capacity(parts.len());
        for p in parts {
            let (pb, pc, ph, pw) = p.value().dims4()?;
            if (pb, ph, pw) != (b, h, w) {
                return Err(DiffError::Shape(format!(
                    "concat_channels: ({pb}, {pc}, {ph}, {pw}) does not match batch/spatial ({b}, {h}, {w})"
                )));
            }
            chans.push(pc);
        }
        let total: usize = chans.iter().sum();
        let hw = h * w;
        let mut y = Tensor::zeros(&[b, total, h, w]);
        {
            let out = y.data_mut();
            let mut c0 = 0;
            for (p, &c) in parts.iter().zip(&chans) {
                let v = p.value();
                for bi in 0..b {
                    let dst = (bi * total + c0) * hw;
                    out[dst..dst + c * hw].copy_from_slice(&v.data()[bi * c * hw..(bi + 1) * c * hw]);
                }
                c0 += c;
            }
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id()).collect();
        Ok(first.derive(parts, y, move |g, grads| {
            let mut c0 = 0;
            for (&id, &c) in ids.iter().zip(&chans) {
                grads.add_with(id, |acc| {
                    for bi in 0..b {
                        let src = (bi * total + c0) * hw;
                        for (a, &gi) in acc[bi * c * hw..(bi + 1) * c * hw].iter_mut().zip(&g.data()[src..src + c * hw]) {
                            *a = *a + gi;
                        }
                    }
                });
                c0 += c;
            }
        }))
    }

    /// Channels `start..start + len` of a 4-D tensor.
    pub fn slice_channels(self, start: usize, len: usize) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        if start + len > c {
            return Err(DiffError::Shape(format!("slice_channels {start}..{} of {c} channels", start + len)));
        }
        let hw = h * w;
        let mut y = Tensor::zeros(&[b, len, h, w]);
        for bi in 0..b {
            let src = (bi * c + start) * hw;
            y.data_mut()[bi * len * hw..(bi + 1) * len * hw].copy_from_slice(&x.data()[src..src + len * hw]);
        }
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for bi in 0..b {
                    let dst = (bi * c + start) * hw;
                    for (a, &gi) in acc[dst..dst + len * hw].iter_mut().zip(&g.data()[bi * len * hw..(bi + 1) * len * hw]) {
                        *a = *a + gi;
                    }
                }
            })
        }))
    }

    /// Column `t` of a 4-D tensor as shape `(B, C, H, 1)`.
    pub fn column(self, t: usize) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        if t >= w {
            return Err(DiffError::Shape(format!("column {t} of width {w}")));
        }
        let rows = b * c * h;
        let y = Tensor::new(&[b, c, h, 1], (0..rows).map(|r| x.data()[r * w + t]).collect())?;
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for (r, &gi) in g.data().iter().enumerate() {
                    acc[r * w + t] = acc[r * w + t] + gi;
                }
            })
        }))
    }

    /// Stacks `(B, C, H, 1)` columns along the width axis.
    pub fn stack_columns(cols: &[Self]) -> Result<Self> {
        let first = cols.first().ok_or_else(|| DiffError::Shape("stack of zero columns".into()))?;
        let (b, c, h, one) = first.value().dims4()?;
        let w = cols.len();
        if one != 1 {
            return Err(DiffError::Shape(format!("stack_columns expects width-1 columns, got width {one}")));
        }
        let rows = b * c * h;
        let mut y = Tensor::zeros(&[b, c, h, w]);
        for (t, col) in cols.iter().enumerate() {
            let v = col.value();
            if v.shape() != [b, c, h, 1] {
                return Err(DiffError::Shape(format!("stack_columns: column shape {:?} differs", v.shape())));
            }
            for r in 0..rows {
                y.data_mut()[r * w + t] = v.data()[r];
            }
        }
        let ids: Vec<usize> = cols.iter().map(|c| c.id()).collect();
        Ok(first.derive(cols, y, move |g, grads| {
            for (t, &id) in ids.iter().enumerate() {
                grads.add_with(id, |acc| {
                    for (r, a) in acc.iter_mut().enumerate() {
                        *a = *a + g.data()[r * w + t];
                    }
                });
            }
        }))
    }

    /// Nearest-neighbour 2x upsampling of a 4-D tensor.
    pub fn upsample_nearest2(self) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        let (h2, w2) = (2 * h, 2 * w);
        let mut y = Tensor::zeros(&[b, c, h2, w2]);
        for p in 0..b * c {
            for i in 0..h2 {
                for j in 0..w2 {
                    y.data_mut()[(p * h2 + i) * w2 + j] = x.data()[(p * h + i / 2) * w + j / 2];
                }
            }
        }
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for p in 0..b * c {
                    for i in 0..h2 {
                        for j in 0..w2 {
                            let a = &mut acc[(p * h + i / 2) * w + j / 2];
                            *a = *a + g.data()[(p * h2 + i) * w2 + j];
                        }
                    }
                }
            })
        }))
    }

    /// Global average pool: `(B, C, H, W) -> (B, C)`.
    pub fn global_avg_pool(self) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        let hw = h * w;
        let inv = T::one() / T::of(hw as f64);
        let y = Tensor::new(&[b, c], x.data().chunks(hw).map(|p| p.iter().fold(T::zero(), |a, &v| a + v) * inv).collect())?;
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for (p, &gi) in acc.chunks_mut(hw).zip(g.data()) {
                    p.iter_mut().for_each(|a| *a = *a + gi * inv);
                }
            })
        }))
    }

    /// Column `e` of a `(B, E)` matrix as shape `(B,)`.
    pub fn select_column(self, e: usize) -> Result<Self> {
        let x = self.value();
        let (b, n) = match x.shape() {
            [b, n] => (*b, *n),
            s => return Err(DiffError::Shape(format!("select_column needs a matrix, got {s:?}"))),
        };
        if e >= n {
            return Err(DiffError::Shape(format!("select_column {e} of {n}")));
        }
        let y = Tensor::new(&[b], (0..b).map(|i| x.data()[i * n + e]).collect())?;
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            grads.add_with(id, |acc| {
                for (i, &gi) in g.data().iter().enumerate() {
                    acc[i * n + e] = acc[i * n + e] + gi;
                }
            })
        }))
    }
}
