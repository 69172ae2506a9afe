use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::model::LabeledSample;
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionKind {
    Iid,
    Dirichlet { alpha: f64 },
    /// Node `i` sees only labels `i mod C` and `(i + 1) mod C`.
    TwoLabels,
}

/// Per-node class probabilities (`probabilities[node][class]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub kind: PartitionKind,
    pub seed: u64,
    pub probabilities: Vec<Vec<f64>>,
}

impl PartitionSpec {
    pub fn node_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn class_count(&self) -> usize {
        self.probabilities.first().map_or(0, Vec::len)
    }

    pub fn row(&self, node: usize) -> Result<&[f64], DataError> {
        self.probabilities
            .get(node)
            .map(Vec::as_slice)
            .ok_or(DataError::UnknownNode {
                node,
                nodes: self.node_count(),
            })
    }
}

fn dirichlet_row(alpha: f64, classes: usize, rng: &mut impl Rng) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated");
    loop {
        let draws: Vec<f64> = (0..classes).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        // Tiny alphas can underflow every draw to zero; redraw.
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

/// Builds per-node class distributions. Dirichlet rows use the normalized
/// gamma construction, seeded.
pub fn make_partition(
    kind: PartitionKind,
    node_count: usize,
    class_count: usize,
    seed: u64,
) -> Result<PartitionSpec, DataError> {
    if node_count < 1 {
        return Err(DataError::TooFew {
            what: "nodes",
            min: 1,
            got: node_count,
        });
    }
    if class_count < 2 {
        return Err(DataError::TooFew {
            what: "classes",
            min: 2,
            got: class_count,
        });
    }
    let probabilities = match kind {
        PartitionKind::Iid => vec![vec![1.0 / class_count as f64; class_count]; node_count],
        PartitionKind::TwoLabels => (0..node_count)
            .map(|i| {
                let mut row = vec![0.0; class_count];
                row[i % class_count] = 0.5;
                row[(i + 1) % class_count] = 0.5;
                row
            })
            .collect(),
        PartitionKind::Dirichlet { alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(DataError::InvalidAlpha(alpha));
            }
            let mut rng = derive_rng(seed, &[crate::rng::stream::PARTITION]);
            (0..node_count)
                .map(|_| dirichlet_row(alpha, class_count, &mut rng))
                .collect()
        }
    };
    Ok(PartitionSpec {
        kind,
        seed,
        probabilities,
    })
}

/// Draws a batch for `node_id`: a class from the node's row, then a uniform
/// sample of that class.
pub fn draw_training_batch(
    spec: &PartitionSpec,
    node_id: usize,
    source: &Dataset,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<LabeledSample>, DataError> {
    if batch_size < 1 {
        return Err(DataError::TooFew {
            what: "samples per batch",
            min: 1,
            got: 0,
        });
    }
    let row = spec.row(node_id)?;
    if row.len() != source.classes() {
        return Err(DataError::ClassMismatch {
            partition: row.len(),
            dataset: source.classes(),
        });
    }
    for (class, &p) in row.iter().enumerate() {
        if p > 0.0 && source.class_indices(class).is_empty() {
            return Err(DataError::EmptyClass { class });
        }
    }
    let classes = WeightedIndex::new(row).map_err(|e| DataError::Invalid(e.to_string()))?;
    Ok((0..batch_size)
        .map(|_| {
            let idx = source.class_indices(classes.sample(rng));
            source.get(idx[rng.random_range(0..idx.len())]).clone()
        })
        .collect())
}
