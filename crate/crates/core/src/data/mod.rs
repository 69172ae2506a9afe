//! Datasets, non-IID partitioners and the two attacker behaviors.

mod attack;
pub mod mnist;
mod partition;
mod synthetic;

pub use attack::{poison_dataset_batch, poison_model};
pub use partition::{draw_training_batch, make_partition, PartitionKind, PartitionSpec};
pub use synthetic::{synthetic_split, SyntheticConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::LabeledSample;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("dirichlet concentration must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("need at least {min} {what}, got {got}")]
    TooFew { what: &'static str, min: usize, got: usize },
    #[error("class {class} has positive probability but no source samples")]
    EmptyClass { class: usize },
    #[error("node {node} outside partition of {nodes} nodes")]
    UnknownNode { node: usize, nodes: usize },
    #[error("partition has {partition} classes, dataset has {dataset}")]
    ClassMismatch { partition: usize, dataset: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Labeled samples indexed by class.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_dim: usize,
    classes: usize,
    samples: Vec<LabeledSample>,
    by_class: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(feature_dim: usize, classes: usize, samples: Vec<LabeledSample>) -> Result<Self, DataError> {
        let mut by_class = vec![Vec::new(); classes];
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(DataError::Invalid(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.label >= classes {
                return Err(DataError::Invalid(format!(
                    "sample {i} has label {} but only {classes} classes",
                    s.label
                )));
            }
            by_class[s.label].push(i);
        }
        Ok(Self {
            feature_dim,
            classes,
            samples,
            by_class,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_indices(&self, class: usize) -> &[usize] {
        &self.by_class[class]
    }

    pub fn get(&self, index: usize) -> &LabeledSample {
        &self.samples[index]
    }

    /// Keeps the first `n` samples.
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset::new(
            self.feature_dim,
            self.classes,
            self.samples.iter().take(n).cloned().collect(),
        )
        .expect("subset of a valid dataset")
    }
}

/// Role a node plays for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeBehavior {
    #[default]
    Honest,
    /// Never trains or broadcasts; only averages what it receives.
    Observer,
    /// Trains on uniform noise and broadcasts the result.
    DatasetPoisoner,
    /// Trains normally but broadcasts random near-zero weights.
    ModelPoisoner,
}

impl NodeBehavior {
    pub fn trains(self) -> bool {
        self != NodeBehavior::Observer
    }

    pub fn is_malicious(self) -> bool {
        matches!(self, NodeBehavior::DatasetPoisoner | NodeBehavior::ModelPoisoner)
    }
}
