use serde::{Deserialize, Serialize};

use crate::codec::Writer;
use crate::crypto::{hash, Digest, HASH_SCHEME, SIGNATURE_SCHEME};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub train_batch_size: u32,
    pub test_batch_size: u32,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            train_batch_size: 64,
            test_batch_size: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    pub initial_ttl: u32,
    pub transactions_per_block: u32,
    /// Fraction of a draft's receipts that must be confirmed to finalize it.
    pub confirmation_threshold: f64,
    pub fedavg_buffer_size: u32,
    /// Transaction lifetime in the deployment's time unit (ticks or seconds).
    pub transaction_lifetime: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            initial_ttl: 1,
            transactions_per_block: 4,
            confirmation_threshold: 0.8,
            fedavg_buffer_size: 4,
            transaction_lifetime: 100,
        }
    }
}

/// Network-wide parameters every node must share. Nodes training the same
/// model under the same parameters compute the same `genesis_digest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenesisBlock {
    pub model_architecture: String,
    pub signature_scheme: String,
    pub hash_scheme: String,
    pub hyperparameters: Hyperparameters,
    pub protocol: ProtocolParams,
    pub genesis_digest: Digest,
}

impl GenesisBlock {
    pub fn new(
        model_architecture: impl Into<String>,
        hyperparameters: Hyperparameters,
        protocol: ProtocolParams,
    ) -> Self {
        let mut g = GenesisBlock {
            model_architecture: model_architecture.into(),
            signature_scheme: SIGNATURE_SCHEME.to_string(),
            hash_scheme: HASH_SCHEME.to_string(),
            hyperparameters,
            protocol,
            genesis_digest: Digest::default(),
        };
        g.genesis_digest = g.compute_digest();
        g
    }

    pub fn compute_digest(&self) -> Digest {
        let mut w = Writer::new();
        w.str(&self.model_architecture)
            .str(&self.signature_scheme)
            .str(&self.hash_scheme);
        let h = &self.hyperparameters;
        w.f64(h.learning_rate)
            .u32(h.train_batch_size)
            .u32(h.test_batch_size);
        let p = &self.protocol;
        w.u32(p.initial_ttl)
            .u32(p.transactions_per_block)
            .f64(p.confirmation_threshold)
            .u32(p.fedavg_buffer_size)
            .u64(p.transaction_lifetime);
        hash(w.as_slice())
    }

    pub fn is_consistent(&self) -> bool {
        self.compute_digest() == self.genesis_digest
    }
}
