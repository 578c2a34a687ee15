use serde::{Deserialize, Serialize};

use crate::error::{DiffError, Result};
use crate::scalar::{gemm, Scalar};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Stride, zero padding and dilation per spatial axis as `(height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub dilation: (usize, usize),
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self { stride: (1, 1), padding: (0, 0), dilation: (1, 1) }
    }
}

impl ConvSpec {
    pub fn new(stride: usize, padding: usize) -> Self {
        Self { stride: (stride, stride), padding: (padding, padding), dilation: (1, 1) }
    }

    pub fn dilated(padding: usize, dilation: usize) -> Self {
        Self { stride: (1, 1), padding: (padding, padding), dilation: (dilation, dilation) }
    }

    /// `floor((n + 2 pad - dilation (k - 1) - 1) / stride) + 1`, or `None` when empty.
    pub fn out_len(n: usize, k: usize, stride: usize, pad: usize, dilation: usize) -> Option<usize> {
        let span = dilation * (k - 1) + 1;
        let padded = n + 2 * pad;
        if k == 0 || stride == 0 || padded < span {
            return None;
        }
        Some((padded - span) / stride + 1)
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    b: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    ho: usize,
    wo: usize,
    spec: ConvSpec,
}

impl Geometry {
    fn new(x: &[usize], wt: &[usize], spec: ConvSpec) -> Result<Self> {
        let (b, cin, h, w) = match x {
            [b, c, h, w] => (*b, *c, *h, *w),
            _ => return Err(DiffError::Shape(format!("conv2d input must be 4-D, got {x:?}"))),
        };
        let (cout, wc, kh, kw) = match wt {
            [o, c, kh, kw] => (*o, *c, *kh, *kw),
            _ => return Err(DiffError::Shape(format!("conv2d weight must be 4-D, got {wt:?}"))),
        };
        if wc != cin {
            return Err(DiffError::Shape(format!("conv2d: input has {cin} channels, weight expects {wc}")));
        }
        if spec.stride.0 == 0 || spec.stride.1 == 0 || spec.dilation.0 == 0 || spec.dilation.1 == 0 {
            return Err(DiffError::Config(format!("conv2d: stride and dilation must be >= 1, got {spec:?}")));
        }
        let ho = ConvSpec::out_len(h, kh, spec.stride.0, spec.padding.0, spec.dilation.0);
        let wo = ConvSpec::out_len(w, kw, spec.stride.1, spec.padding.1, spec.dilation.1);
        match (ho, wo) {
            (Some(ho), Some(wo)) => Ok(Self { b, cin, h, w, cout, kh, kw, ho, wo, spec }),
            _ => Err(DiffError::Shape(format!("conv2d: kernel {kh}x{kw} with {spec:?} does not fit input {h}x{w}"))),
        }
    }

    fn k(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.spec.stride == (1, 1) && self.spec.padding == (0, 0)
    }

    /// Visits `(column row, output index, input index)` for every in-bounds tap.
    fn for_taps(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (sh, sw) = self.spec.stride;
        let (ph, pw) = self.spec.padding;
        let (dh, dw) = self.spec.dilation;
        for ci in 0..self.cin {
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let row = (ci * self.kh + ky) * self.kw + kx;
                    for oy in 0..self.ho {
                        let iy = (oy * sh + ky * dh) as isize - ph as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        for ox in 0..self.wo {
                            let ix = (ox * sw + kx * dw) as isize - pw as isize;
                            if ix < 0 || ix >= self.w as isize {
                                continue;
                            }
                            f(row, oy * self.wo + ox, (ci * self.h + iy as usize) * self.w + ix as usize);
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        cols.iter_mut().for_each(|v| *v = T::zero());
        let n = self.ho * self.wo;
        self.for_taps(|row, o, i| cols[row * n + o] = x[i]);
    }

    fn col2im<T: Scalar>(&self, cols: &[T], dx: &mut [T]) {
        let n = self.ho * self.wo;
        self.for_taps(|row, o, i| dx[i] = dx[i] + cols[row * n + o]);
    }
}

/// Cross-correlation of `x (B, Cin, H, W)` with `weight (Cout, Cin, kh, kw)`.
pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: Option<&Tensor<T>>, spec: ConvSpec) -> Result<Tensor<T>> {
    let g = Geometry::new(x.shape(), weight.shape(), spec)?;
    if let Some(b) = bias {
        if b.shape() != [g.cout] {
            return Err(DiffError::Shape(format!("conv2d bias {:?} for {} output channels", b.shape(), g.cout)));
        }
    }
    Ok(forward(&g, x.data(), weight.data(), bias.map(|b| b.data())))
}

fn forward<T: Scalar>(g: &Geometry, x: &[T], w: &[T], bias: Option<&[T]>) -> Tensor<T> {
    let (n_in, n_out) = (g.cin * g.h * g.w, g.ho * g.wo);
    let k = g.k();
    let mut y = Tensor::zeros(&[g.b, g.cout, g.ho, g.wo]);
    let mut cols = if g.pointwise() { Vec::new() } else { vec![T::zero(); k * n_out] };
    for bi in 0..g.b {
        let xb = &x[bi * n_in..(bi + 1) * n_in];
        let src: &[T] = if g.pointwise() {
            xb
        } else {
            g.im2col(xb, &mut cols);
            &cols
        };
        let out = &mut y.data_mut()[bi * g.cout * n_out..(bi + 1) * g.cout * n_out];
        gemm(g.cout, k, n_out, w, false, src, false, out, false);
        if let Some(bias) = bias {
            for (row, &c) in out.chunks_mut(n_out).zip(bias) {
                row.iter_mut().for_each(|v| *v = *v + c);
            }
        }
    }
    y
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn conv2d(self, weight: Self, bias: Option<Self>, spec: ConvSpec) -> Result<Self> {
        let (x, w) = (self.value(), weight.value());
        let g = Geometry::new(x.shape(), w.shape(), spec)?;
        let bv = bias.map(|b| b.value());
        if let Some(b) = &bv {
            if b.shape() != [g.cout] {
                return Err(DiffError::Shape(format!("conv2d bias {:?} for {} output channels", b.shape(), g.cout)));
            }
        }
        let y = forward(&g, x.data(), w.data(), bv.as_ref().map(|b| b.data()));
        let mut inputs = vec![self, weight];
        inputs.extend(bias);
        let (ix, iw, ib) = (self.id(), weight.id(), bias.map(|b| b.id()));
        Ok(self.derive(&inputs, y, move |gout, grads| {
            let (n_in, n_out, k) = (g.cin * g.h * g.w, g.ho * g.wo, g.k());
            let (want_x, want_w) = (grads.wants(ix), grads.wants(iw));
            let mut cols = if g.pointwise() { Vec::new() } else { vec![T::zero(); k * n_out] };
            let mut dcols = vec![T::zero(); if want_x && !g.pointwise() { k * n_out } else { 0 }];
            let mut dw = vec![T::zero(); if want_w { w.len() } else { 0 }];
            let mut dx = vec![T::zero(); if want_x { x.len() } else { 0 }];
            for bi in 0..g.b {
                let gb = &gout.data()[bi * g.cout * n_out..(bi + 1) * g.cout * n_out];
                let xb = &x.data()[bi * n_in..(bi + 1) * n_in];
                if want_w {
                    let src: &[T] = if g.pointwise() {
                        xb
                    } else {
                        g.im2col(xb, &mut cols);
                        &cols
                    };
                    gemm(g.cout, n_out, k, gb, false, src, true, &mut dw, true);
                }
                if want_x {
                    let dxb = &mut dx[bi * n_in..(bi + 1) * n_in];
                    if g.pointwise() {
                        gemm(k, g.cout, n_out, w.data(), true, gb, false, dxb, true);
                    } else {
                        gemm(k, g.cout, n_out, w.data(), true, gb, false, &mut dcols, false);
                        g.col2im(&dcols, dxb);
                    }
                }
            }
            if want_x {
                grads.add(ix, Tensor::new(x.shape(), dx).expect("conv dx shape"));
            }
            if want_w {
                grads.add(iw, Tensor::new(w.shape(), dw).expect("conv dw shape"));
            }
            if let Some(ib) = ib {
                grads.add_with(ib, |acc| {
                    for gb in gout.data().chunks(g.cout * n_out) {
                        for (a, row) in acc.iter_mut().zip(gb.chunks(n_out)) {
                            *a = *a + row.iter().fold(T::zero(), |s, &v| s + v);
                        }
                    }
                });
            }
        }))
    }
}
