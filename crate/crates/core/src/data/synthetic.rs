use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::model::LabeledSample;
use crate::rng::derive_rng;

/// Class-conditional Gaussian clusters. Class `k` is centered at
/// `separation * e_k` with unit variance in every dimension, so class means
/// sit on a scaled simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub feature_dim: usize,
    pub separation: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            feature_dim: 32,
            separation: 4.0,
            train_per_class: 1000,
            test_per_class: 100,
            seed: 0,
        }
    }
}

fn generate(cfg: &SyntheticConfig, per_class: usize, tag: u64) -> Vec<LabeledSample> {
    let mut rng = derive_rng(cfg.seed, &[tag]);
    let mut out = Vec::with_capacity(per_class * cfg.classes);
    // Interleave classes so prefixes stay balanced.
    for _ in 0..per_class {
        for class in 0..cfg.classes {
            let features = (0..cfg.feature_dim)
                .map(|d| {
                    let noise: f64 = rng.sample(StandardNormal);
                    if d == class {
                        cfg.separation + noise
                    } else {
                        noise
                    }
                })
                .collect();
            out.push(LabeledSample::new(features, class));
        }
    }
    out
}

/// Returns `(train, test)` drawn from disjoint random streams.
pub fn synthetic_split(cfg: &SyntheticConfig) -> Result<(Dataset, Dataset), DataError> {
    if cfg.classes < 2 {
        return Err(DataError::TooFew {
            what: "classes",
            min: 2,
            got: cfg.classes,
        });
    }
    if cfg.feature_dim < cfg.classes {
        return Err(DataError::Invalid(format!(
            "feature_dim {} must be at least the class count {}",
            cfg.feature_dim, cfg.classes
        )));
    }
    let train = Dataset::new(cfg.feature_dim, cfg.classes, generate(cfg, cfg.train_per_class, 1))?;
    let test = Dataset::new(cfg.feature_dim, cfg.classes, generate(cfg, cfg.test_per_class, 2))?;
    Ok((train, test))
}
