//! Model buffer, the two averaging rules, and the cross-node difference metric.

use std::sync::Arc;

use serde::Serialize;

use super::{Layer, ModelError, ModelParams};
use crate::crypto::Address;
use crate::reputation::ReputationTable;

#[derive(Debug, Clone, Serialize)]
pub struct BufferEntry {
    pub generator: Address,
    pub model: Arc<ModelParams>,
    pub accuracy: f64,
    pub create_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferInsert {
    Added,
    /// Replaced an older model from the same generator.
    Replaced,
    /// An equal-or-newer model from the same generator is already held.
    Stale,
}

/// Fixed-capacity store of received models; reaching capacity triggers one
/// model update.
#[derive(Debug, Clone)]
pub struct FedAvgBuffer {
    capacity: usize,
    latest_per_generator: bool,
    entries: Vec<BufferEntry>,
}

impl FedAvgBuffer {
    /// Every received model takes a slot, so a single busy neighbor can fill
    /// the buffer on its own.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            latest_per_generator: false,
            entries: Vec::with_capacity(capacity),
        }
    }

    /// At most one entry per generator, newest by `create_time`.
    pub fn latest_per_generator(capacity: usize) -> Self {
        Self {
            latest_per_generator: true,
            ..Self::new(capacity)
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn entries(&self) -> &[BufferEntry] {
        &self.entries
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Inserts an entry. Callers drain the buffer once it is full; inserting
    /// into a full buffer from a new generator panics.
    pub fn insert(&mut self, entry: BufferEntry) -> Result<BufferInsert, ModelError> {
        if !(0.0..=1.0).contains(&entry.accuracy) {
            return Err(ModelError::AccuracyRange(entry.accuracy));
        }
        if let Some(existing) = self
            .entries
            .iter_mut()
            .find(|e| e.generator == entry.generator)
            .filter(|_| self.latest_per_generator)
        {
            if entry.create_time > existing.create_time {
                *existing = entry;
                return Ok(BufferInsert::Replaced);
            }
            return Ok(BufferInsert::Stale);
        }
        assert!(!self.is_full(), "insert into a full fedavg buffer");
        self.entries.push(entry);
        Ok(BufferInsert::Added)
    }

    pub fn observations(&self) -> Vec<(Address, f64)> {
        self.entries
            .iter()
            .map(|e| (e.generator, e.accuracy))
            .collect()
    }

    fn check_ready(&self, prev: &ModelParams) -> Result<(), ModelError> {
        if !self.is_full() {
            return Err(ModelError::BufferNotFull {
                len: self.len(),
                capacity: self.capacity,
            });
        }
        if self.entries.iter().any(|e| !e.model.same_shape(prev)) {
            return Err(ModelError::ArchitectureMismatch);
        }
        Ok(())
    }
}

/// `(sum_n coeff_n * model_n + prev) / 2`, elementwise.
fn blend(entries: &[BufferEntry], coeffs: &[f64], prev: &ModelParams) -> Result<ModelParams, ModelError> {
    let layers = prev
        .layers()
        .iter()
        .enumerate()
        .map(|(li, layer)| {
            let mut acc = vec![0.0; layer.values.len()];
            for (entry, &c) in entries.iter().zip(coeffs) {
                for (a, w) in acc.iter_mut().zip(&entry.model.layers()[li].values) {
                    *a += c * w;
                }
            }
            for (a, p) in acc.iter_mut().zip(&layer.values) {
                *a = (*a + p) / 2.0;
            }
            Layer {
                name: layer.name.clone(),
                values: acc,
            }
        })
        .collect();
    ModelParams::new(*prev.architecture_id(), layers)
}

/// Uniform mean of the buffered models, averaged 50/50 with `prev`.
pub fn half_fedavg(buffer: &FedAvgBuffer, prev: &ModelParams) -> Result<ModelParams, ModelError> {
    buffer.check_ready(prev)?;
    let n = buffer.len() as f64;
    let coeffs = vec![1.0 / n; buffer.len()];
    blend(buffer.entries(), &coeffs, prev)
}

/// Normalized `reputation * accuracy` weights, or `None` when they are all zero.
pub fn normalized_weights(buffer: &FedAvgBuffer, reputations: &ReputationTable) -> Option<Vec<f64>> {
    let raw: Vec<f64> = buffer
        .entries()
        .iter()
        .map(|e| reputations.get(&e.generator) * e.accuracy)
        .collect();
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        Some(raw.into_iter().map(|w| w / total).collect())
    } else {
        None
    }
}

/// Reputation-and-accuracy weighted mean of the buffered models, averaged
/// 50/50 with `prev`. Falls back to [`half_fedavg`] when every weight is zero.
pub fn weighted_fedavg(
    buffer: &FedAvgBuffer,
    reputations: &ReputationTable,
    prev: &ModelParams,
) -> Result<ModelParams, ModelError> {
    buffer.check_ready(prev)?;
    match normalized_weights(buffer, reputations) {
        Some(w) => blend(buffer.entries(), &w, prev),
        None => half_fedavg(buffer, prev),
    }
}

/// Sum of the weights in each layer.
pub fn layer_sums(model: &ModelParams) -> Vec<f64> {
    model.layers().iter().map(|l| l.values.iter().sum()).collect()
}

/// Per-layer cyclic mean absolute difference of layer sums across models:
/// `(sum_{n=1}^{N-1} |s_n - s_{n-1}| + |s_0 - s_{N-1}|) / N`.
pub fn model_difference(models: &[&ModelParams]) -> Result<Vec<f64>, ModelError> {
    if models.len() < 2 {
        return Err(ModelError::TooFewModels(models.len()));
    }
    if models.iter().any(|m| !m.same_shape(models[0])) {
        return Err(ModelError::ArchitectureMismatch);
    }
    let sums: Vec<Vec<f64>> = models.iter().map(|m| layer_sums(m)).collect();
    let n = sums.len();
    let layers = sums[0].len();
    Ok((0..layers)
        .map(|l| {
            let adjacent: f64 = (1..n).map(|i| (sums[i][l] - sums[i - 1][l]).abs()).sum();
            (adjacent + (sums[0][l] - sums[n - 1][l]).abs()) / n as f64
        })
        .collect())
}
