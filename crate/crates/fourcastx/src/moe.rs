use atmos_diffops::{DiffError, Scalar, Var};

use crate::error::Result;

/// `sum_i w[:, i] * experts[i]`, accumulated in expert order.
pub fn mix_experts<'t, T: Scalar>(experts: &[Var<'t, T>], w: Var<'t, T>) -> Result<Var<'t, T>> {
    let shape = w.shape();
    if shape.len() != 2 || shape[1] != experts.len() || experts.is_empty() {
        return Err(DiffError::Shape(format!("{} experts mixed by weights of shape {shape:?}", experts.len())).into());
    }
    let mut acc: Option<Var<'t, T>> = None;
    for (i, e) in experts.iter().enumerate() {
        let term = e.scale_samples(w.select_column(i)?)?;
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    Ok(acc.expect("at least one expert"))
}
