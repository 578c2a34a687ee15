use crate::error::{DiffError, Result};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t, T: Scalar> Var<'t, T> {
    /// Per-sample, per-channel normalisation over the spatial axes followed by
    /// a per-channel affine map `scale * x_hat + shift`.
    pub fn instance_norm(self, scale: Self, shift: Self, eps: f64) -> Result<Self> {
        let x = self.value();
        let (b, c, h, w) = x.dims4()?;
        let (sv, tv) = (scale.value(), shift.value());
        if sv.shape() != [c] || tv.shape() != [c] {
            return Err(DiffError::Shape(format!(
                "instance_norm affine {:?}/{:?} for {c} channels",
                sv.shape(),
                tv.shape()
            )));
        }
        let n = h * w;
        let nf = T::of(n as f64);
        let eps = T::of(eps);
        let mut xhat = vec![T::zero(); x.len()];
        let mut inv_std = vec![T::zero(); b * c];
        let mut y = Tensor::zeros(x.shape());
        for p in 0..b * c {
            let xs = &x.data()[p * n..(p + 1) * n];
            let mean = xs.iter().fold(T::zero(), |a, &v| a + v) / nf;
            let var = xs.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / nf;
            let is = T::one() / (var + eps).sqrt();
            inv_std[p] = is;
            let (g, s) = (sv.data()[p % c], tv.data()[p % c]);
            for i in 0..n {
                let xh = (xs[i] - mean) * is;
                xhat[p * n + i] = xh;
                y.data_mut()[p * n + i] = xh * g + s;
            }
        }
        let (ix, is_, it) = (self.id(), scale.id(), shift.id());
        Ok(self.derive(&[self, scale, shift], y, move |g, grads| {
            let gd = g.data();
            if grads.wants(is_) || grads.wants(it) {
                let mut dscale = vec![T::zero(); c];
                let mut dshift = vec![T::zero(); c];
                for p in 0..b * c {
                    for i in 0..n {
                        dscale[p % c] = dscale[p % c] + gd[p * n + i] * xhat[p * n + i];
                        dshift[p % c] = dshift[p % c] + gd[p * n + i];
                    }
                }
                grads.add(is_, Tensor::new(&[c], dscale).expect("scale grad"));
                grads.add(it, Tensor::new(&[c], dshift).expect("shift grad"));
            }
            if grads.wants(ix) {
                grads.add_with(ix, |acc| {
                    for p in 0..b * c {
                        let gam = sv.data()[p % c];
                        let (gs, xs) = (&gd[p * n..(p + 1) * n], &xhat[p * n..(p + 1) * n]);
                        let mean_g = gs.iter().fold(T::zero(), |a, &v| a + v) / nf;
                        let mean_gx = gs.iter().zip(xs).fold(T::zero(), |a, (&gi, &xi)| a + gi * xi) / nf;
                        let k = gam * inv_std[p];
                        for i in 0..n {
                            let a = &mut acc[p * n + i];
                            *a = *a + k * (gs[i] - mean_g - xs[i] * mean_gx);
                        }
                    }
                });
            }
        }))
    }
}
