use rand::Rng;

use crate::model::{Architecture, LabeledSample, ModelParams};

/// Uniform-noise samples in `[0, 1]` with uniformly random labels.
pub fn poison_dataset_batch(
    feature_dim: usize,
    batch_size: usize,
    class_count: usize,
    rng: &mut impl Rng,
) -> Vec<LabeledSample> {
    (0..batch_size)
        .map(|_| {
            let features = (0..feature_dim).map(|_| rng.random_range(0.0..=1.0)).collect();
            LabeledSample::new(features, rng.random_range(0..class_count.max(1)))
        })
        .collect()
}

pub const POISON_MAX_WEIGHT: f64 = 0.001;

/// Random parameters with every weight uniform in `[0, 0.001]`.
pub fn poison_model(arch: &Architecture, rng: &mut impl Rng) -> ModelParams {
    let values = arch
        .layer_shapes()
        .into_iter()
        .map(|(_, n)| (0..n).map(|_| rng.random_range(0.0..=POISON_MAX_WEIGHT)).collect())
        .collect();
    ModelParams::for_architecture(arch, values).expect("finite weights of the right shape")
}
