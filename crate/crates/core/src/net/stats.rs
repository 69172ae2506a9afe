use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::Block;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("chain has no blocks")]
    EmptyChain,
}

/// Blockchain statistics of one node's chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub transactions_per_block: f64,
    /// Receipt digests confirmed by other nodes, averaged over blocks. The
    /// generator's confirmation of its own receipts does not count.
    pub confirmations_per_block: f64,
    /// Distinct other nodes that receipted anything in the chain.
    pub peers: usize,
    pub blocks: usize,
}

pub fn export_stats(chain: &[Block]) -> Result<ChainStats, StatsError> {
    if chain.is_empty() {
        return Err(StatsError::EmptyChain);
    }
    let n = chain.len() as f64;
    let mut peers = BTreeSet::new();
    let mut confirmed = 0usize;
    let mut transactions = 0usize;
    for block in chain {
        transactions += block.transactions.len();
        let generators: BTreeSet<_> = block.transactions.iter().map(|t| t.generator).collect();
        for t in &block.transactions {
            peers.extend(t.receipts.iter().map(|r| r.creator).filter(|c| !generators.contains(c)));
        }
        confirmed += block
            .confirmations
            .iter()
            .filter(|c| !generators.contains(&c.creator))
            .flat_map(|c| c.confirmed_receipt_digests.iter())
            .collect::<BTreeSet<_>>()
            .len();
    }
    Ok(ChainStats {
        transactions_per_block: transactions as f64 / n,
        confirmations_per_block: confirmed as f64 / n,
        peers: peers.len(),
        blocks: chain.len(),
    })
}
