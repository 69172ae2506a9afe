use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::topology::{full_topology, generate_topology, validate_topology, Adjacency};
use super::SimError;
use crate::data::{NodeBehavior, PartitionKind, SyntheticConfig};
use crate::ledger::{GenesisBlock, Hyperparameters, ProtocolParams};
use crate::model::Architecture;
use crate::reputation::policy_by_name;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    /// Every node opens `active` connections to random others.
    Random { active: usize },
    Full,
    Explicit { adjacency: Adjacency },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticConfig),
    /// Directory with the four uncompressed MNIST idx files.
    Mnist { dir: PathBuf },
}

/// Everything needed to reproduce a run. Unset fields take the defaults
/// below, which match the reference setup: 10 nodes, two active connections
/// each, buffer 4, batch 64, training every 8 to 12 ticks, ttl 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub node_count: usize,
    pub topology: TopologySpec,
    /// Node index → behavior; unlisted nodes are honest.
    pub behaviors: BTreeMap<usize, NodeBehavior>,
    pub partition: PartitionKind,
    pub policy: String,
    pub buffer_size: u32,
    pub batch_size: u32,
    /// Size of each node's slice of the test set used for receipts.
    pub test_batch_size: u32,
    pub learning_rate: f64,
    pub hidden_units: usize,
    pub injection_low: u64,
    pub injection_high: u64,
    pub ttl: u32,
    pub total_ticks: u64,
    pub metrics_interval: u64,
    pub seed: u64,
    pub repetitions: usize,
    pub dataset: DatasetSpec,
    /// Build blocks alongside training. Metrics do not depend on it.
    pub ledger: bool,
    pub transactions_per_block: u32,
    pub confirmation_threshold: f64,
    pub transaction_lifetime: u64,
    pub confirmation_timeout: u64,
    /// Probability that a confirmation message is lost in transit.
    pub confirmation_loss: f64,
    pub record_events: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        let h = Hyperparameters::default();
        let p = ProtocolParams::default();
        Self {
            node_count: 10,
            topology: TopologySpec::Random { active: 2 },
            behaviors: BTreeMap::new(),
            partition: PartitionKind::Iid,
            policy: crate::reputation::POLICY_HALF_FEDAVG.to_string(),
            buffer_size: p.fedavg_buffer_size,
            batch_size: h.train_batch_size,
            test_batch_size: h.test_batch_size,
            learning_rate: h.learning_rate,
            hidden_units: 32,
            injection_low: 8,
            injection_high: 12,
            ttl: p.initial_ttl,
            total_ticks: 2000,
            metrics_interval: 10,
            seed: 0,
            repetitions: 1,
            dataset: DatasetSpec::Synthetic(SyntheticConfig::default()),
            ledger: true,
            transactions_per_block: p.transactions_per_block,
            confirmation_threshold: p.confirmation_threshold,
            transaction_lifetime: p.transaction_lifetime,
            confirmation_timeout: 5,
            confirmation_loss: 0.0,
            record_events: true,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn behavior(&self, node: usize) -> NodeBehavior {
        self.behaviors.get(&node).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.node_count < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.node_count));
        }
        if !(1 <= self.injection_low && self.injection_low <= self.injection_high) {
            return bad(format!(
                "injection bounds must satisfy 1 <= low <= high, got [{}, {}]",
                self.injection_low, self.injection_high
            ));
        }
        if let Some(&i) = self.behaviors.keys().find(|&&i| i >= self.node_count) {
            return bad(format!("behavior given for node {i}, beyond {} nodes", self.node_count));
        }
        for (what, v) in [
            ("buffer_size", self.buffer_size as u64),
            ("batch_size", self.batch_size as u64),
            ("test_batch_size", self.test_batch_size as u64),
            ("ttl", self.ttl as u64),
            ("total_ticks", self.total_ticks),
            ("metrics_interval", self.metrics_interval),
            ("repetitions", self.repetitions as u64),
            ("transactions_per_block", self.transactions_per_block as u64),
            ("transaction_lifetime", self.transaction_lifetime),
            ("hidden_units", self.hidden_units as u64),
        ] {
            if v == 0 {
                return bad(format!("{what} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.confirmation_threshold) {
            return bad("confirmation_threshold must be in [0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.confirmation_loss) {
            return bad("confirmation_loss must be in [0, 1]".into());
        }
        if let PartitionKind::Dirichlet { alpha } = self.partition {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return bad(format!("dirichlet alpha must be positive, got {alpha}"));
            }
        }
        policy_by_name(&self.policy).map_err(|e| SimError::Config(e.to_string()))?;
        if let TopologySpec::Explicit { adjacency } = &self.topology {
            validate_topology(adjacency, self.node_count)?;
        }
        Ok(())
    }

    pub fn build_topology(&self) -> Result<Adjacency, SimError> {
        let adjacency = match &self.topology {
            TopologySpec::Random { active } => {
                generate_topology(self.node_count, *active, self.seed)?
            }
            TopologySpec::Full => full_topology(self.node_count),
            TopologySpec::Explicit { adjacency } => adjacency.clone(),
        };
        validate_topology(&adjacency, self.node_count)?;
        Ok(adjacency)
    }

    pub fn genesis(&self, arch: &Architecture) -> GenesisBlock {
        GenesisBlock::new(
            arch.descriptor(),
            Hyperparameters {
                learning_rate: self.learning_rate,
                train_batch_size: self.batch_size,
                test_batch_size: self.test_batch_size,
            },
            ProtocolParams {
                initial_ttl: self.ttl,
                transactions_per_block: self.transactions_per_block,
                confirmation_threshold: self.confirmation_threshold,
                fedavg_buffer_size: self.buffer_size,
                transaction_lifetime: self.transaction_lifetime,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_with_defaults() {
        let c = SimConfig::from_json(
            r#"{"node_count": 4, "behaviors": {"1": "model_poisoner"},
                "partition": {"kind": "dirichlet", "alpha": 0.5},
                "topology": {"kind": "full"}}"#,
        )
        .unwrap();
        assert_eq!(c.node_count, 4);
        assert_eq!(c.behavior(1), NodeBehavior::ModelPoisoner);
        assert_eq!(c.behavior(0), NodeBehavior::Honest);
        assert_eq!(c.batch_size, 64);
        c.validate().unwrap();
        let back = SimConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = SimConfig::default();
        for c in [
            SimConfig { injection_low: 0, ..base.clone() },
            SimConfig { injection_low: 13, ..base.clone() },
            SimConfig { node_count: 1, ..base.clone() },
            SimConfig { policy: "nope".into(), ..base.clone() },
            SimConfig { behaviors: BTreeMap::from([(10, NodeBehavior::Observer)]), ..base.clone() },
            SimConfig {
                topology: TopologySpec::Explicit { adjacency: vec![vec![]; 10] },
                ..base.clone()
            },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(SimConfig::from_json(r#"{"nodes": 3}"#).is_err());
    }
}
