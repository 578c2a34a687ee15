use atmos_diffops::checkpoint::{decode_checkpoint, encode_checkpoint};
use atmos_diffops::nn::Conv2d;
use atmos_diffops::{ConvSpec, Ctx, DiffError, ParamStore, Scalar, Var};

use crate::error::Result;

pub const HRF_WIDTH: usize = 32;
pub const HRF_DILATIONS: [usize; 4] = [1, 2, 4, 8];
const SLOPE: f64 = 0.2;

/// Frozen, randomly initialised stack of dilated 3x3 convolutions used as a
/// wide-receptive-field feature space.
#[derive(Debug, Clone)]
pub struct HrfExtractor<T> {
    pub store: ParamStore<T>,
    pub convs: Vec<Conv2d>,
}

impl<T: Scalar> HrfExtractor<T> {
    pub fn new(seed: u64) -> Result<Self> {
        let mut store = ParamStore::new(seed);
        let convs = Self::layout(&mut store)?;
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            store.set_trainable(id, false);
        }
        Ok(Self { store, convs })
    }

    fn layout(store: &mut ParamStore<T>) -> Result<Vec<Conv2d>> {
        let mut convs = Vec::new();
        let mut in_ch = 1;
        for (i, &d) in HRF_DILATIONS.iter().enumerate() {
            let spec = ConvSpec::dilated(d, d);
            convs.push(Conv2d::new(store, &format!("hrf.conv{}", i + 1), in_ch, HRF_WIDTH, (3, 3), spec, true)?);
            in_ch = HRF_WIDTH;
        }
        Ok(convs)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(encode_checkpoint(&self.store, serde_json::json!({ "kind": "hrf_extractor" }), serde_json::Value::Null)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut loaded, _) = decode_checkpoint::<T>(bytes)?;
        let mut fresh = ParamStore::<T>::new(loaded.seed());
        let convs = Self::layout(&mut fresh)?;
        if fresh.len() != loaded.len() {
            return Err(DiffError::Checkpoint(format!("extractor has {} tensors, expected {}", loaded.len(), fresh.len())).into());
        }
        let ids: Vec<_> = loaded.ids().collect();
        for id in ids {
            loaded.set_trainable(id, false);
        }
        Ok(Self { store: loaded, convs })
    }

    /// Activations of every layer for a `(B, 1, H, W)` image.
    pub fn features<'t>(&self, x: Var<'t, T>) -> Result<Vec<Var<'t, T>>> {
        let ctx = Ctx::new(x.tape(), &self.store).frozen();
        let mut h = x;
        let mut out = Vec::with_capacity(self.convs.len());
        for c in &self.convs {
            h = c.forward(&ctx, h)?.leaky_relu(SLOPE);
            out.push(h);
        }
        Ok(out)
    }
}

/// Mean over layers of the mean squared feature difference.
pub fn hrf_perceptual<'t, T: Scalar>(extractor: &HrfExtractor<T>, pred: Var<'t, T>, target: Var<'t, T>) -> Result<Var<'t, T>> {
    if pred.shape() != target.shape() {
        return Err(DiffError::Shape(format!("prediction {:?} vs target {:?}", pred.shape(), target.shape())).into());
    }
    let (fp, ft) = (extractor.features(pred)?, extractor.features(target)?);
    let mut acc: Option<Var<'t, T>> = None;
    for (p, t) in fp.into_iter().zip(ft) {
        let term = p.sub(t)?.square().mean();
        acc = Some(match acc {
            Some(a) => a.add(term)?,
            None => term,
        });
    }
    Ok(acc.expect("four layers").scale(1.0 / HRF_DILATIONS.len() as f64))
}
