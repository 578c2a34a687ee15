use crate::error::Result;
use crate::ops::ConvSpec;
use crate::params::{Ctx, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;
use crate::tensor::Tensor;

use super::layers::Conv2d;

/// Convolutional LSTM scanned along the width axis. Each of the `W` steps sees
/// one `(B, C, H, 1)` column; gate convolutions run along the height axis.
/// Gate channel order is input, forget, output, candidate.
#[derive(Debug, Clone)]
pub struct ConvLstm {
    pub hidden: usize,
    pub input_conv: Conv2d,
    pub hidden_conv: Conv2d,
}

impl ConvLstm {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, hidden: usize, kernel: usize) -> Result<Self> {
        let spec = ConvSpec { stride: (1, 1), padding: (kernel / 2, 0), dilation: (1, 1) };
        let input_conv = Conv2d::new(store, &format!("{name}.input"), in_ch, 4 * hidden, (kernel, 1), spec, true)?;
        let hidden_conv = Conv2d::new(store, &format!("{name}.hidden"), hidden, 4 * hidden, (kernel, 1), spec, false)?;
        Ok(Self { hidden, input_conv, hidden_conv })
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let (b, _, h, w) = x.value().dims4()?;
        let nh = self.hidden;
        // The input-to-gate convolution acts on each column independently, so
        // it runs once over the whole map.
        let gx = self.input_conv.forward(ctx, x)?;
        let mut state: Option<(Var<'t, T>, Var<'t, T>)> = None;
        let mut outs = Vec::with_capacity(w);
        for t in 0..w {
            let mut gates = gx.column(t)?;
            if let Some((hp, _)) = state {
                gates = gates.add(self.hidden_conv.forward(ctx, hp)?)?;
            }
            let i = gates.slice_channels(0, nh)?.sigmoid();
            let f = gates.slice_channels(nh, nh)?.sigmoid();
            let o = gates.slice_channels(2 * nh, nh)?.sigmoid();
            let g = gates.slice_channels(3 * nh, nh)?.tanh();
            let c = match state {
                Some((_, cp)) => f.mul(cp)?.add(i.mul(g)?)?,
                None => i.mul(g)?,
            };
            let hcur = o.mul(c.tanh())?;
            outs.push(hcur);
            state = Some((hcur, c));
        }
        if outs.is_empty() {
            return Ok(ctx.constant(Tensor::zeros(&[b, nh, h, 0])));
        }
        Var::stack_columns(&outs)
    }
}
