//! Generator and critic sharing one parameter store, plus checkpoint I/O.

use std::path::Path;

use atmos_diffops::checkpoint::{decode_manifest, encode_checkpoint, load_into, CheckpointManifest};
use atmos_diffops::{Ctx, ParamStore, Tape, Tensor};
use fourcastx::{Discriminator, Generator, NetworkConfig};

use crate::data::Sample;
use crate::error::{io_err, HarnessError, Result};

/// Names are disjoint (`enc.*`, `mid.*`, `dec.*`, `head*` vs `disc.*`), so
/// one store and one checkpoint hold both networks.
#[derive(Debug, Clone)]
pub struct Models {
    pub config: NetworkConfig,
    pub store: ParamStore<f32>,
    pub generator: Generator,
    pub critic: Discriminator,
}

/// Evaluation-mode generator output for one slice, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub gamma: Vec<f64>,
    pub aleatoric: Vec<f64>,
    pub epistemic: Vec<f64>,
}

impl Models {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        let mut store = ParamStore::new(config.seed);
        let generator = Generator::new(&mut store, config)?;
        let critic = Discriminator::new(&mut store, config)?;
        Ok(Self { config: config.clone(), store, generator, critic })
    }

    pub fn to_bytes(&self, extra: serde_json::Value) -> Result<Vec<u8>> {
        Ok(encode_checkpoint(&self.store, serde_json::to_value(&self.config)?, extra)?)
    }

    /// Rebuilds both networks from the configuration recorded in the
    /// checkpoint, then loads the weights.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, CheckpointManifest)> {
        let (manifest, _) = decode_manifest(bytes)?;
        let config: NetworkConfig = serde_json::from_value(manifest.model_config.clone())?;
        let mut models = Self::new(&config)?;
        if manifest.store_seed != models.store.seed() {
            return Err(HarnessError::Config(format!(
                "checkpoint store seed {} does not match network seed {}",
                manifest.store_seed,
                models.store.seed()
            )));
        }
        load_into(&mut models.store, bytes)?;
        Ok((models, manifest))
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<()> {
        std::fs::write(path, self.to_bytes(extra)?).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointManifest)> {
        Self::from_bytes(&std::fs::read(path).map_err(io_err(path))?)
    }

    /// Deterministic inference: gate noise off, no gradients.
    pub fn predict(&self, sample: &Sample) -> Result<Prediction> {
        let shape = [1, 1, sample.rows, sample.cols];
        let to_tensor = |v: Vec<f64>| Tensor::<f32>::new(&shape, v.into_iter().map(|x| x as f32).collect());
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &self.store).frozen();
        let a = tape.constant(to_tensor(sample.atb_masked())?);
        let m = tape.constant(to_tensor(sample.mask.iter().map(|&x| x as f64).collect())?);
        let p = self.generator.forward(&ctx, a, m)?;
        Ok(Prediction {
            gamma: p.gamma.value().to_f64_vec(),
            aleatoric: p.aleatoric().to_f64_vec(),
            epistemic: p.epistemic().to_f64_vec(),
        })
    }
}
