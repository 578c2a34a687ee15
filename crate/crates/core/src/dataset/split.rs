use std::collections::BTreeSet;

use super::DatasetManifest;
use crate::error::{ConfigError, Result};
use crate::rng::{shuffle, CounterRng};

/// Scene-level train/test assignment. All slices of a scene (both
/// wavelengths included) land in the same partition.
pub fn split_dataset(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<DatasetManifest> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(ConfigError::param("split_ratio", format!("must lie in (0, 1), got {ratio}")));
    }
    let mut scenes: Vec<usize> = manifest
        .slices
        .iter()
        .map(|s| s.scene_index)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if scenes.len() < 2 {
        return Err(ConfigError::param("n_scenes", format!("splitting needs at least 2 scenes, found {}", scenes.len())));
    }
    shuffle(&mut scenes, &CounterRng::keyed(&[seed, 0x5350_4C49_54]));
    let n_train = ((ratio * scenes.len() as f64).round() as usize).clamp(1, scenes.len() - 1);
    let train_scenes: BTreeSet<usize> = scenes[..n_train].iter().copied().collect();

    let mut out = manifest.clone();
    out.train.clear();
    out.test.clear();
    for (i, s) in manifest.slices.iter().enumerate() {
        if train_scenes.contains(&s.scene_index) {
            out.train.push(i);
        } else {
            out.test.push(i);
        }
    }
    Ok(out)
}
