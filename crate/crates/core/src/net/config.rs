use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::NetError;
use crate::data::{NodeBehavior, PartitionKind};
use crate::ledger::{GenesisBlock, Hyperparameters, ProtocolParams};
use crate::model::Architecture;
use crate::reputation::policy_by_name;
use crate::sim::DatasetSpec;

/// Settings for one deployed node. Nodes meant to talk to each other must
/// agree on `seed`, `dataset`, `hidden_units`, `hyperparameters` and
/// `protocol`, since those determine the genesis block and initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodeRunConfig {
    /// `host:port`; port 0 picks a free one.
    pub listen: String,
    /// Peers this node dials. The other side of each pair only listens.
    pub peers: Vec<String>,
    /// Connected peers required before data ingestion starts. Defaults to
    /// the number of peers dialed.
    pub wait_for_peers: Option<usize>,
    /// Fixed identity for reproducible experiments; random when unset.
    pub identity_seed: Option<u64>,
    /// This node's row in the data partition.
    pub node_index: usize,
    pub node_count: usize,
    pub partition: PartitionKind,
    pub seed: u64,
    pub dataset: DatasetSpec,
    pub hidden_units: usize,
    pub hyperparameters: Hyperparameters,
    pub protocol: ProtocolParams,
    pub policy: String,
    pub behavior: NodeBehavior,
    pub samples_per_second: f64,
    /// Seconds a draft waits for confirmations.
    pub confirmation_timeout: u64,
    /// Frames queued per peer before further sends are dropped.
    pub outbound_queue: usize,
    pub run_seconds: Option<f64>,
    pub stop_after_blocks: Option<u64>,
    /// Where the chain, event log and profiler report go on shutdown.
    pub output_dir: Option<PathBuf>,
}

impl Default for NodeRunConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:0".into(),
            peers: Vec::new(),
            wait_for_peers: None,
            identity_seed: None,
            node_index: 0,
            node_count: 1,
            partition: PartitionKind::Iid,
            seed: 0,
            dataset: DatasetSpec::Synthetic(Default::default()),
            hidden_units: 32,
            hyperparameters: Hyperparameters::default(),
            protocol: ProtocolParams::default(),
            policy: crate::reputation::POLICY_HALF_FEDAVG.into(),
            behavior: NodeBehavior::Honest,
            samples_per_second: 8.0,
            confirmation_timeout: 5,
            outbound_queue: 256,
            run_seconds: None,
            stop_after_blocks: None,
            output_dir: None,
        }
    }
}

impl NodeRunConfig {
    pub fn from_json(text: &str) -> Result<Self, NetError> {
        serde_json::from_str(text).map_err(|e| NetError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: String| Err(NetError::Config(m));
        if self.node_index >= self.node_count {
            return bad(format!("node_index {} outside node_count {}", self.node_index, self.node_count));
        }
        if !(self.samples_per_second > 0.0 && self.samples_per_second.is_finite()) {
            return bad(format!("samples_per_second must be positive, got {}", self.samples_per_second));
        }
        if self.outbound_queue == 0 || self.hidden_units == 0 {
            return bad("outbound_queue and hidden_units must be positive".into());
        }
        if self.hyperparameters.train_batch_size == 0 || self.hyperparameters.test_batch_size == 0 {
            return bad("batch sizes must be positive".into());
        }
        if self.protocol.fedavg_buffer_size == 0 || self.protocol.transactions_per_block == 0 {
            return bad("buffer size and transactions per block must be positive".into());
        }
        if self.run_seconds.is_some_and(|s| !(s >= 0.0)) {
            return bad("run_seconds must be non-negative".into());
        }
        policy_by_name(&self.policy).map_err(|e| NetError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn genesis(&self, arch: &Architecture) -> GenesisBlock {
        GenesisBlock::new(arch.descriptor(), self.hyperparameters.clone(), self.protocol.clone())
    }
}
