//! Orthonormal real 2-D FFT over the last two axes. Spectra are stored as real
//! tensors with interleaved channels: channel `2c` holds the real part of input
//! channel `c` and `2c + 1` the imaginary part, over `H x (W/2 + 1)` bins.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

struct Fft2<T: Scalar> {
    h: usize,
    w: usize,
    row_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Scalar> Fft2<T> {
    fn new(h: usize, w: usize) -> Self {
        let mut p = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: p.plan_fft_forward(w),
            row_inv: p.plan_fft_inverse(w),
            col_fwd: p.plan_fft_forward(h),
            col_inv: p.plan_fft_inverse(h),
        }
    }

    fn wr(&self) -> usize {
        self.w / 2 + 1
    }

    /// In-place orthonormal 2-D transform of an `h x w` plane.
    fn run(&self, plane: &mut [Complex<T>], inverse: bool) {
        let (h, w) = (self.h, self.w);
        let (rows, cols) = if inverse { (&self.row_inv, &self.col_inv) } else { (&self.row_fwd, &self.col_fwd) };
        rows.process(plane);
        let mut t = vec![Complex::new(T::zero(), T::zero()); h * w];
        for i in 0..h {
            for j in 0..w {
                t[j * h + i] = plane[i * w + j];
            }
        }
        cols.process(&mut t);
        let s = T::one() / T::of(((h * w) as f64).sqrt());
        for i in 0..h {
            for j in 0..w {
                plane[i * w + j] = t[j * h + i] * s;
            }
        }
    }

    /// Multiplicity of half-spectrum column `v` in the full spectrum.
    fn weight(&self, v: usize) -> T {
        if v == 0 || 2 * v == self.w {
            T::one()
        } else {
            T::of(2.0)
        }
    }

    fn forward_real(&self, x: &[T], re: &mut [T], im: &mut [T]) {
        let (h, w, wr) = (self.h, self.w, self.wr());
        let mut z: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.run(&mut z, false);
        for u in 0..h {
            for v in 0..wr {
                re[u * wr + v] = z[u * w + v].re;
                im[u * wr + v] = z[u * w + v].im;
            }
        }
    }

    /// `Re(F^H (zero-filled, column-weighted) spectrum)`; `weighted` selects
    /// the Hermitian reconstruction weights of the inverse real transform.
    fn adjoint_real(&self, re: &[T], im: &[T], weighted: bool, out: &mut [T]) {
        let (h, w, wr) = (self.h, self.w, self.wr());
        let mut z = vec![Complex::new(T::zero(), T::zero()); h * w];
        for u in 0..h {
            for v in 0..wr {
                let m = if weighted { self.weight(v) } else { T::one() };
                z[u * w + v] = Complex::new(re[u * wr + v] * m, im[u * wr + v] * m);
            }
        }
        self.run(&mut z, true);
        for (o, c) in out.iter_mut().zip(&z) {
            *o = *o + c.re;
        }
    }

    /// Full forward transform of a real plane restricted to the half spectrum,
    /// scaled by the column weights: the adjoint of the inverse real transform.
    fn forward_weighted(&self, x: &[T], re: &mut [T], im: &mut [T]) {
        self.forward_real(x, re, im);
        let wr = self.wr();
        for u in 0..self.h {
            for v in 0..wr {
                let m = self.weight(v);
                re[u * wr + v] = re[u * wr + v] * m;
                im[u * wr + v] = im[u * wr + v] * m;
            }
        }
    }
}

fn even_dims(what: &str, h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 || h % 2 != 0 || w % 2 != 0 {
        return Err(DiffError::Shape(format!("{what} needs even, nonzero H and W, got {h}x{w}")));
    }
    Ok(())
}

/// Orthonormal real 2-D FFT of `(B, C, H, W)` into `(B, 2C, H, W/2 + 1)`.
pub fn rfft2<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c, h, w) = x.dims4()?;
    even_dims("rfft2", h, w)?;
    let f = Fft2::new(h, w);
    Ok(rfft2_with(&f, x, b, c))
}

fn rfft2_with<T: Scalar>(f: &Fft2<T>, x: &Tensor<T>, b: usize, c: usize) -> Tensor<T> {
    let (h, w, wr) = (f.h, f.w, f.wr());
    let (n, m) = (h * w, h * wr);
    let mut y = Tensor::zeros(&[b, 2 * c, h, wr]);
    for p in 0..b * c {
        let out = &mut y.data_mut()[2 * p * m..2 * (p + 1) * m];
        let (re, im) = out.split_at_mut(m);
        f.forward_real(&x.data()[p * n..(p + 1) * n], re, im);
    }
    y
}

/// Inverse of [`rfft2`] for an even output width `W = 2 (Wr - 1)`.
pub fn irfft2<T: Scalar>(y: &Tensor<T>) -> Result<Tensor<T>> {
    let (b, c2, h, wr) = y.dims4()?;
    let w = spectrum_width(c2, h, wr)?;
    let f = Fft2::new(h, w);
    Ok(irfft2_with(&f, y, b, c2 / 2))
}

fn spectrum_width(c2: usize, h: usize, wr: usize) -> Result<usize> {
    if c2 % 2 != 0 || wr < 2 {
        return Err(DiffError::Shape(format!("irfft2 needs interleaved channels and >= 2 bins, got {c2} x {h} x {wr}")));
    }
    let w = 2 * (wr - 1);
    even_dims("irfft2", h, w)?;
    Ok(w)
}

fn irfft2_with<T: Scalar>(f: &Fft2<T>, y: &Tensor<T>, b: usize, c: usize) -> Tensor<T> {
    let (n, m) = (f.h * f.w, f.h * f.wr());
    let mut x = Tensor::zeros(&[b, c, f.h, f.w]);
    for p in 0..b * c {
        let src = &y.data()[2 * p * m..2 * (p + 1) * m];
        f.adjoint_real(&src[..m], &src[m..], true, &mut x.data_mut()[p * n..(p + 1) * n]);
    }
    x
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn rfft2(self) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        even_dims("rfft2", h, w)?;
        let f = Fft2::new(h, w);
        let y = rfft2_with(&f, &x, b, c);
        let id = self.id();
        Ok(self.derive(&[self], y, move |g, grads| {
            let (n, m) = (h * w, h * f.wr());
            grads.add_with(id, |acc| {
                for p in 0..b * c {
                    let src = &g.data()[2 * p * m..2 * (p + 1) * m];
                    f.adjoint_real(&src[..m], &src[m..], false, &mut acc[p * n..(p + 1) * n]);
                }
            })
        }))
    }

    pub fn irfft2(self) -> Result<Self> {
        let yv = self.value();
        let (b, c2, h, wr) = yv.dims4()?;
        let w = spectrum_width(c2, h, wr)?;
        let f = Fft2::new(h, w);
        let x = irfft2_with(&f, &yv, b, c2 / 2);
        let id = self.id();
        Ok(self.derive(&[self], x, move |g, grads| {
            let (n, m) = (h * w, h * wr);
            let (mut re, mut im) = (vec![T::zero(); m], vec![T::zero(); m]);
            grads.add_with(id, |acc| {
                for p in 0..b * c2 / 2 {
                    f.forward_weighted(&g.data()[p * n..(p + 1) * n], &mut re, &mut im);
                    let dst = &mut acc[2 * p * m..2 * (p + 1) * m];
                    for (a, &v) in dst.iter_mut().zip(re.iter().chain(im.iter())) {
                        *a = *a + v;
                    }
                }
            })
        }))
    }
}
