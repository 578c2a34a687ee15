use atmos_diffops::{DiffError, Scalar, Tensor, Var};

use crate::error::Result;

/// `mean |pred - y|`.
pub fn l1<'t, T: Scalar>(pred: Var<'t, T>, y: &Tensor<T>) -> Result<Var<'t, T>> {
    Ok(pred.sub(pred.tape().constant(y.clone()))?.abs().mean())
}

/// Hybrid image `(1 - m) atb + m pred` against the target: measured signal
/// is kept where it is reliable, the prediction fills masked pixels.
pub fn physics_mix<'t, T: Scalar>(pred: Var<'t, T>, atb: &Tensor<T>, mask: &Tensor<T>, y: &Tensor<T>) -> Result<Var<'t, T>> {
    let s = pred.shape();
    if atb.shape() != s.as_slice() || mask.shape() != s.as_slice() || y.shape() != s.as_slice() {
        return Err(DiffError::Shape(format!(
            "mix inputs {:?}, {:?}, {:?} vs prediction {s:?}",
            atb.shape(),
            mask.shape(),
            y.shape()
        ))
        .into());
    }
    let tape = pred.tape();
    let kept = atb.zip_map(mask, |a, m| (T::one() - m) * a);
    let hybrid = pred.mul(tape.constant(mask.clone()))?.add(tape.constant(kept))?;
    l1(hybrid, y)
}
