use crate::error::{DiffError, Result};
use crate::params::{Ctx, ParamStore};
use crate::scalar::Scalar;
use crate::tape::Var;

use super::layers::{Conv2d, InstanceNorm};
use super::spectral::SpectralUnit;

/// Splits `channels` into `(local, global)` with `global = channels * ratio`,
/// which must be a whole number.
pub fn split_channels(channels: usize, ratio: f64) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(DiffError::Config(format!("global ratio must lie in [0, 1], got {ratio}")));
    }
    let g = channels as f64 * ratio;
    if (g - g.round()).abs() > 1e-9 {
        return Err(DiffError::Config(format!("{channels} channels cannot be split at global ratio {ratio}")));
    }
    let g = g.round() as usize;
    Ok((channels - g, g))
}

/// Global-to-global path: 1x1 projection `p`, then `p + spectral(p)`.
#[derive(Debug, Clone)]
struct GlobalPath {
    proj: Conv2d,
    spectral: SpectralUnit,
}

/// One fast-Fourier-convolution layer: local and global channel groups
/// exchange information through four paths, each destination group is
/// normalised and rectified, and the groups are concatenated (local first).
#[derive(Debug, Clone)]
pub struct FfcLayer {
    pub in_split: (usize, usize),
    pub out_split: (usize, usize),
    l2l: Option<Conv2d>,
    g2l: Option<Conv2d>,
    l2g: Option<Conv2d>,
    g2g: Option<GlobalPath>,
    norm_l: Option<InstanceNorm>,
    norm_g: Option<InstanceNorm>,
}

impl FfcLayer {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, out_ch: usize, ratio: f64) -> Result<Self> {
        let (il, ig) = split_channels(in_ch, ratio)?;
        let (ol, og) = split_channels(out_ch, ratio)?;
        let conv = |store: &mut ParamStore<T>, path: &str, i: usize, o: usize| -> Result<Option<Conv2d>> {
            if i > 0 && o > 0 {
                Ok(Some(Conv2d::same3(store, &format!("{name}.{path}"), i, o)?))
            } else {
                Ok(None)
            }
        };
        let l2l = conv(store, "l2l", il, ol)?;
        let g2l = conv(store, "g2l", ig, ol)?;
        let l2g = conv(store, "l2g", il, og)?;
        let g2g = if ig > 0 && og > 0 {
            Some(GlobalPath {
                proj: Conv2d::pointwise(store, &format!("{name}.g2g.proj"), ig, og)?,
                spectral: SpectralUnit::new(store, &format!("{name}.g2g.spectral"), og, true)?,
            })
        } else {
            None
        };
        if (ol > 0 && l2l.is_none() && g2l.is_none()) || (og > 0 && l2g.is_none() && g2g.is_none()) {
            return Err(DiffError::Config(format!("{name}: split {il}/{ig} -> {ol}/{og} leaves an output group unfed")));
        }
        let norm_l = if ol > 0 { Some(InstanceNorm::new(store, &format!("{name}.norm_l"), ol)?) } else { None };
        let norm_g = if og > 0 { Some(InstanceNorm::new(store, &format!("{name}.norm_g"), og)?) } else { None };
        Ok(Self { in_split: (il, ig), out_split: (ol, og), l2l, g2l, l2g, g2g, norm_l, norm_g })
    }

    pub fn out_channels(&self) -> usize {
        self.out_split.0 + self.out_split.1
    }

    pub fn has_spectral_path(&self) -> bool {
        self.g2g.is_some()
    }

    /// Destination norm of the local group, else of the global group.
    pub fn norms(&self) -> Vec<&InstanceNorm> {
        self.norm_l.iter().chain(self.norm_g.iter()).collect()
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let (il, ig) = self.in_split;
        let c = x.value().dims4()?.1;
        if c != il + ig {
            return Err(DiffError::Shape(format!("FFC layer expects {} channels, got {c}", il + ig)));
        }
        let xl = if il > 0 { Some(x.slice_channels(0, il)?) } else { None };
        let xg = if ig > 0 { Some(x.slice_channels(il, ig)?) } else { None };
        let mut parts = Vec::new();
        let sum = |a: Option<Var<'t, T>>, b: Option<Var<'t, T>>| -> Result<Option<Var<'t, T>>> {
            Ok(match (a, b) {
                (Some(a), Some(b)) => Some(a.add(b)?),
                (a, b) => a.or(b),
            })
        };
        let apply = |conv: &Option<Conv2d>, src: Option<Var<'t, T>>| -> Result<Option<Var<'t, T>>> {
            match (conv, src) {
                (Some(conv), Some(src)) => Ok(Some(conv.forward(ctx, src)?)),
                _ => Ok(None),
            }
        };
        let local = sum(apply(&self.l2l, xl)?, apply(&self.g2l, xg)?)?;
        let global_from_g = match (&self.g2g, xg) {
            (Some(path), Some(xg)) => {
                let p = path.proj.forward(ctx, xg)?;
                Some(p.add(path.spectral.forward(ctx, p)?)?)
            }
            _ => None,
        };
        let global = sum(apply(&self.l2g, xl)?, global_from_g)?;
        if let (Some(v), Some(n)) = (local, &self.norm_l) {
            parts.push(n.forward(ctx, v)?.relu());
        }
        if let (Some(v), Some(n)) = (global, &self.norm_g) {
            parts.push(n.forward(ctx, v)?.relu());
        }
        if parts.len() == 1 {
            Ok(parts[0])
        } else {
            Var::concat_channels(&parts)
        }
    }
}

/// Two FFC layers with a residual connection (1x1 projection when the
/// channel count changes).
#[derive(Debug, Clone)]
pub struct FfcBlock {
    pub layer1: FfcLayer,
    pub layer2: FfcLayer,
    pub skip: Option<Conv2d>,
}

impl FfcBlock {
    pub fn new<T: Scalar>(store: &mut ParamStore<T>, name: &str, in_ch: usize, out_ch: usize, ratio: f64) -> Result<Self> {
        let layer1 = FfcLayer::new(store, &format!("{name}.layer1"), in_ch, out_ch, ratio)?;
        let layer2 = FfcLayer::new(store, &format!("{name}.layer2"), out_ch, out_ch, ratio)?;
        let skip = if in_ch != out_ch { Some(Conv2d::pointwise(store, &format!("{name}.skip"), in_ch, out_ch)?) } else { None };
        Ok(Self { layer1, layer2, skip })
    }

    pub fn out_channels(&self) -> usize {
        self.layer2.out_channels()
    }

    pub fn forward<'t, T: Scalar>(&self, ctx: &Ctx<'t, T>, x: Var<'t, T>) -> Result<Var<'t, T>> {
        let y = self.layer2.forward(ctx, self.layer1.forward(ctx, x)?)?;
        let res = match &self.skip {
            Some(s) => s.forward(ctx, x)?,
            None => x,
        };
        y.add(res)
    }
}
