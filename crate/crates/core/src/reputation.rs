//! Local, never-shared trust scores for neighbors and the policies that
//! update them.
//!
//! A [`ReputationPolicy`] sees only the `(generator, accuracy)` observations
//! of the buffer about to be averaged, so alternative policies drop in
//! without touching the protocol engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::Address;

pub const PENALTY: f64 = 0.05;
pub const INITIAL_REPUTATION: f64 = 1.0;

pub const POLICY_HALF_FEDAVG: &str = "half_fedavg";
pub const POLICY_REPUTATION_005: &str = "reputation_0.05";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown reputation policy {0:?} (expected \"half_fedavg\" or \"reputation_0.05\")")]
pub struct UnknownPolicy(pub String);

/// Per-neighbor reputation in `[0, 1]`. Unknown neighbors read as full trust.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReputationTable {
    entries: BTreeMap<Address, f64>,
}

impl ReputationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, address: &Address) -> f64 {
        self.entries
            .get(address)
            .copied()
            .unwrap_or(INITIAL_REPUTATION)
    }

    /// Records first contact, leaving existing scores untouched.
    pub fn touch(&mut self, address: &Address) {
        self.entries.entry(*address).or_insert(INITIAL_REPUTATION);
    }

    pub fn set(&mut self, address: Address, value: f64) {
        self.entries.insert(address, value.clamp(0.0, 1.0));
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Address, f64)> {
        self.entries.iter().map(|(a, v)| (a, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Penalizes the sender of the single lowest-accuracy observation by 0.05,
/// stopping at zero. Equal lowest accuracies go to the smallest address.
pub fn update_reputation_0_05(
    table: &ReputationTable,
    observations: &[(Address, f64)],
) -> ReputationTable {
    let mut out = table.clone();
    for (addr, _) in observations {
        out.touch(addr);
    }
    let lowest = observations.iter().min_by(|(a1, acc1), (a2, acc2)| {
        acc1.total_cmp(acc2).then_with(|| a1.cmp(a2))
    });
    if let Some((addr, _)) = lowest {
        let current = out.get(addr);
        out.set(*addr, (current - PENALTY).max(0.0));
    }
    out
}

/// True iff every listed generator has reputation exactly zero. Vacuously
/// true for an empty list.
pub fn reputations_all_zero(table: &ReputationTable, generators: &[Address]) -> bool {
    generators.iter().all(|g| table.get(g) == 0.0)
}

/// Pluggable reputation engine.
pub trait ReputationPolicy: Send + Sync {
    /// Identifier recorded in run metadata.
    fn name(&self) -> &str;

    /// Deterministic update from one buffer's observations.
    fn update(&self, table: &ReputationTable, observations: &[(Address, f64)]) -> ReputationTable;

    /// Whether averaging weights models by `reputation * accuracy`.
    fn weighted(&self) -> bool;
}

/// Plain half-and-half averaging with no reputation bookkeeping.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfFedAvgPolicy;

impl ReputationPolicy for HalfFedAvgPolicy {
    fn name(&self) -> &str {
        POLICY_HALF_FEDAVG
    }

    fn update(&self, table: &ReputationTable, _: &[(Address, f64)]) -> ReputationTable {
        table.clone()
    }

    fn weighted(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Reputation005Policy;

impl ReputationPolicy for Reputation005Policy {
    fn name(&self) -> &str {
        POLICY_REPUTATION_005
    }

    fn update(&self, table: &ReputationTable, observations: &[(Address, f64)]) -> ReputationTable {
        update_reputation_0_05(table, observations)
    }

    fn weighted(&self) -> bool {
        true
    }
}

pub fn policy_by_name(name: &str) -> Result<Box<dyn ReputationPolicy>, UnknownPolicy> {
    match name {
        POLICY_HALF_FEDAVG => Ok(Box::new(HalfFedAvgPolicy)),
        POLICY_REPUTATION_005 | "reputation-0.05" => Ok(Box::new(Reputation005Policy)),
        other => Err(UnknownPolicy(other.to_string())),
    }
}
