use atmos_diffops::nn::{Conv2d, CrossAttention, FfcBlock};
use atmos_diffops::{Ctx, DiffError, ParamStore, Scalar, Var};

use crate::config::NetworkConfig;
use crate::error::Result;

/// One upsampling stage: FFC, 2x nearest upsample + 3x3 conv halving the
/// width, cross-attention to the bottleneck, skip concat, FFC fuse.
#[derive(Debug, Clone)]
pub struct DecoderStage {
    pub pre: FfcBlock,
    pub up: Conv2d,
    pub attention: CrossAttention,
    pub fuse: FfcBlock,
}

impl DecoderStage {
    pub fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        context_ch: usize,
        cfg: &NetworkConfig,
    ) -> Result<Self> {
        let r = cfg.ratio_global;
        Ok(Self {
            pre: FfcBlock::new(store, &format!("{name}.pre"), in_ch, in_ch, r)?,
            up: Conv2d::same3(store, &format!("{name}.up"), in_ch, out_ch)?,
            attention: CrossAttention::new(store, &format!("{name}.attn"), out_ch, context_ch, cfg.n_heads)?,
            fuse: FfcBlock::new(store, &format!("{name}.fuse"), 2 * out_ch, out_ch, r)?,
        })
    }

    pub fn forward<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        d: Var<'t, T>,
        context: Var<'t, T>,
        skip: Var<'t, T>,
        attend: bool,
    ) -> Result<Var<'t, T>> {
        let up = self.up.forward(ctx, self.pre.forward(ctx, d)?.upsample_nearest2()?)?;
        let (us, ss) = (up.shape(), skip.shape());
        if us[0] != ss[0] || us[2..] != ss[2..] {
            return Err(DiffError::Shape(format!("decoder stage output {us:?} does not match skip {ss:?}")).into());
        }
        let a = if attend { self.attention.forward(ctx, up, context)? } else { up };
        Ok(self.fuse.forward(ctx, Var::concat_channels(&[a, skip])?)?)
    }
}

#[derive(Debug, Clone)]
pub struct Decoder {
    pub stages: [DecoderStage; 3],
}

impl Decoder {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, cfg: &NetworkConfig) -> Result<Self> {
        let [c1, c2, c3, c4] = cfg.channels;
        Ok(Self {
            stages: [
                DecoderStage::new(store, "dec.stage1", c4, c3, c4, cfg)?,
                DecoderStage::new(store, "dec.stage2", c3, c2, c4, cfg)?,
                DecoderStage::new(store, "dec.stage3", c2, c1, c4, cfg)?,
            ],
        })
    }

    /// Output of every stage; the last is the full-resolution feature map.
    /// `skips` is `[e2, e1, e0]`.
    pub fn forward_stages<'t, T: Scalar>(
        &self,
        ctx: &Ctx<'t, T>,
        b: Var<'t, T>,
        skips: [Var<'t, T>; 3],
        attend: bool,
    ) -> Result<[Var<'t, T>; 3]> {
        let s1 = self.stages[0].forward(ctx, b, b, skips[0], attend)?;
        let s2 = self.stages[1].forward(ctx, s1, b, skips[1], attend)?;
        let s3 = self.stages[2].forward(ctx, s2, b, skips[2], attend)?;
        Ok([s1, s2, s3])
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, b: Var<'t, T>, skips: [Var<'t, T>; 3]) -> Result<Var<'t, T>> {
        Ok(self.forward_stages(ctx, b, skips, true)?[2])
    }
}
