//! The ML substrate: model parameters, a small MLP classifier, and the
//! averaging rules and difference metric applied across node models.

mod aggregate;
mod mlp;

pub use aggregate::{
    half_fedavg, layer_sums, model_difference, normalized_weights, weighted_fedavg, BufferEntry,
    BufferInsert, FedAvgBuffer,
};
pub use mlp::{evaluate, init_model, loss, loss_and_gradient, predict, train_step};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::{hash, Digest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown architecture descriptor: {0:?}")]
    UnknownArchitecture(String),
    #[error("non-finite weight in layer {layer:?}")]
    NonFinite { layer: String },
    #[error("parameter shape does not match architecture: {0}")]
    Shape(String),
    #[error("models belong to different architectures")]
    ArchitectureMismatch,
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty sample set")]
    EmptySamples,
    #[error("sample has {actual} features, architecture expects {expected}")]
    FeatureDim { expected: usize, actual: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("fedavg buffer holds {len} of {capacity} entries")]
    BufferNotFull { len: usize, capacity: usize },
    #[error("accuracy {0} outside [0, 1]")]
    AccuracyRange(f64),
    #[error("at least two models are required, got {0}")]
    TooFewModels(usize),
}

/// One input example for the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// Supported model families. Only a one-hidden-layer ReLU MLP with a softmax
/// head ships today.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    Mlp {
        input: usize,
        hidden: usize,
        classes: usize,
    },
}

impl Architecture {
    pub fn mlp(input: usize, hidden: usize, classes: usize) -> Self {
        Architecture::Mlp {
            input,
            hidden,
            classes,
        }
    }

    /// Textual descriptor of layer shapes and activations, recorded in the
    /// genesis block.
    pub fn descriptor(&self) -> String {
        match *self {
            Architecture::Mlp {
                input,
                hidden,
                classes,
            } => format!("mlp:{input}-{hidden}-{classes}:relu:softmax"),
        }
    }

    pub fn parse(descriptor: &str) -> Result<Self, ModelError> {
        let unknown = || ModelError::UnknownArchitecture(descriptor.to_string());
        let rest = descriptor.strip_prefix("mlp:").ok_or_else(unknown)?;
        let dims = rest.strip_suffix(":relu:softmax").ok_or_else(unknown)?;
        let parts: Vec<usize> = dims
            .split('-')
            .map(|p| p.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| unknown())?;
        match parts.as_slice() {
            &[input, hidden, classes] if input > 0 && hidden > 0 && classes >= 2 => {
                Ok(Architecture::mlp(input, hidden, classes))
            }
            _ => Err(unknown()),
        }
    }

    pub fn id(&self) -> Digest {
        hash(self.descriptor().as_bytes())
    }

    pub fn input_dim(&self) -> usize {
        match *self {
            Architecture::Mlp { input, .. } => input,
        }
    }

    pub fn classes(&self) -> usize {
        match *self {
            Architecture::Mlp { classes, .. } => classes,
        }
    }

    /// `(name, length)` of every parameter layer, in canonical order.
    pub fn layer_shapes(&self) -> Vec<(&'static str, usize)> {
        match *self {
            Architecture::Mlp {
                input,
                hidden,
                classes,
            } => vec![
                ("w1", hidden * input),
                ("b1", hidden),
                ("w2", classes * hidden),
                ("b2", classes),
            ],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(_, n)| n).sum()
    }

    pub fn check(&self, params: &ModelParams) -> Result<(), ModelError> {
        if params.architecture_id != self.id() {
            return Err(ModelError::ArchitectureMismatch);
        }
        let shapes = self.layer_shapes();
        if shapes.len() != params.layers.len() {
            return Err(ModelError::Shape(format!(
                "expected {} layers, found {}",
                shapes.len(),
                params.layers.len()
            )));
        }
        for ((name, len), layer) in shapes.iter().zip(&params.layers) {
            if layer.name != *name || layer.values.len() != *len {
                return Err(ModelError::Shape(format!(
                    "expected layer {name}[{len}], found {}[{}]",
                    layer.name,
                    layer.values.len()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub values: Vec<f64>,
}

/// Per-layer flat weight vectors tied to an architecture by its digest.
///
/// All weights are finite; constructors reject NaN and infinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    architecture_id: Digest,
    layers: Vec<Layer>,
}

impl ModelParams {
    pub fn new(architecture_id: Digest, layers: Vec<Layer>) -> Result<Self, ModelError> {
        for layer in &layers {
            if layer.values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite {
                    layer: layer.name.clone(),
                });
            }
        }
        Ok(Self {
            architecture_id,
            layers,
        })
    }

    /// Builds parameters and checks them against `arch`.
    pub fn for_architecture(arch: &Architecture, values: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let layers = arch
            .layer_shapes()
            .iter()
            .zip(values)
            .map(|((name, _), values)| Layer {
                name: name.to_string(),
                values,
            })
            .collect();
        let params = Self::new(arch.id(), layers)?;
        arch.check(&params)?;
        Ok(params)
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let values = arch
            .layer_shapes()
            .iter()
            .map(|(_, n)| vec![0.0; *n])
            .collect();
        Self::for_architecture(arch, values).expect("zero weights are finite")
    }

    pub fn architecture_id(&self) -> &Digest {
        &self.architecture_id
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers
            .iter()
            .find(|l| l.name == name)
            .map(|l| l.values.as_slice())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.values.len()).sum()
    }

    /// Iterates every weight in canonical order.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.values.iter().copied())
    }

    pub(crate) fn same_shape(&self, other: &ModelParams) -> bool {
        self.architecture_id == other.architecture_id
            && self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.name == b.name && a.values.len() == b.values.len())
    }

    /// Applies `f` to every weight, producing a new model. Fails if `f`
    /// yields a non-finite value.
    pub fn map_weights(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Self, ModelError> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(li, l)| Layer {
                name: l.name.clone(),
                values: l.values.iter().enumerate().map(|(i, &v)| f(li, i, v)).collect(),
            })
            .collect();
        Self::new(self.architecture_id, layers)
    }

    /// Mutable access for tests and attack tooling that need to bypass the
    /// finiteness check deliberately.
    #[doc(hidden)]
    pub fn layers_mut_unchecked(&mut self) -> &mut [Layer] {
        &mut self.layers
    }
}

impl Encode for ModelParams {
    fn encode(&self, w: &mut Writer) {
        self.architecture_id.encode(w);
        w.u32(self.layers.len() as u32);
        for layer in &self.layers {
            w.str(&layer.name);
            w.u32(layer.values.len() as u32);
            for &v in &layer.values {
                w.f64(v);
            }
        }
    }
}

impl Decode for ModelParams {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let architecture_id = Digest::decode(r)?;
        let n_layers = r.count(8)?;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let name = r.string()?;
            let n = r.count(8)?;
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
            layers.push(Layer { name, values });
        }
        ModelParams::new(architecture_id, layers).map_err(|e| DecodeError::Invalid {
            field: "ml_model",
            reason: e.to_string(),
        })
    }
}
