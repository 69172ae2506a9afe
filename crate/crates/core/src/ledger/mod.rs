//! Proof-of-contribution ledger: transactions, receipts, blocks and
//! confirmations, chained by digest and protected by signatures.
//!
//! Each node grows its own chain. A block records the node's own
//! transactions together with the receipts its neighbors signed for them,
//! and is sealed by those neighbors' confirmations:
//!
//! ```text
//! transaction --(neighbors)--> receipts --> draft block
//!     --(neighbors)--> confirmations --> finalized block
//! ```

mod block;
mod genesis;
pub mod store;
mod transaction;

pub use block::{
    confirm_block, confirmation_coverage, draft_block, finalize_block, Block, Confirmation,
    ConfirmationLog,
};
pub use genesis::{GenesisBlock, Hyperparameters, ProtocolParams};
pub use transaction::{
    compute_received_at_ttl, create_receipt, create_transaction, Receipt, Transaction,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::crypto::{CryptoError, Digest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("ttl must be at least 1")]
    ZeroTtl,
    #[error("transaction lifetime must be positive")]
    InvalidLifetime,
    #[error("ttl exhausted: transaction must not be forwarded further")]
    TtlExhausted,
    #[error("transaction expired at {expire_time}, local time {now}")]
    Expired { expire_time: u64, now: u64 },
    #[error("this node already produced a receipt for the transaction")]
    DuplicateReceipt,
    #[error("accuracy {0} outside [0, 1]")]
    AccuracyRange(f64),
    #[error("cannot draft a block without transactions")]
    EmptyBlock,
    #[error("every transaction in a block needs at least one receipt")]
    UnreceiptedTransaction,
    #[error("blocks may only contain the generator's own transactions")]
    ForeignTransaction,
    #[error("receipt references another transaction")]
    ForeignReceipt,
    #[error("nothing to confirm: no receipts by this node in the draft")]
    NothingToConfirm,
    #[error("draft already confirmed by this node")]
    AlreadyConfirmed,
    #[error("insufficient confirmations: {achieved:.3} of receipts confirmed, {threshold} required")]
    InsufficientConfirmations { achieved: f64, threshold: f64 },
    #[error("invalid confirmation: {0}")]
    InvalidConfirmation(String),
    #[error("invalid draft: {0}")]
    InvalidDraft(String),
    #[error("{0} digest does not match its content")]
    BadDigest(&'static str),
    #[error("{0} signature does not verify")]
    BadSignature(&'static str),
    #[error("{0} key does not hash to the claimed address")]
    AddressMismatch(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// First failure found while walking a chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainFault {
    /// Position in the chain slice.
    pub index: usize,
    pub height: u64,
    pub reason: String,
}

impl fmt::Display for ChainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "block #{} (height {}): {}", self.index, self.height, self.reason)
    }
}

impl std::error::Error for ChainFault {}

fn verify_block(block: &Block, expected_prev: &Digest, genesis: &GenesisBlock) -> Result<(), String> {
    if block.genesis_digest != genesis.genesis_digest {
        return Err("genesis digest mismatch".into());
    }
    if &block.prev_final_digest != expected_prev {
        return Err("previous final digest mismatch".into());
    }
    if block.compute_draft_digest() != block.draft_digest {
        return Err("draft digest does not match content".into());
    }
    let final_digest = block.final_digest.ok_or("block is not finalized")?;
    if block.compute_final_digest() != final_digest {
        return Err("final digest does not match content".into());
    }
    if block.transactions.is_empty() {
        return Err("block has no transactions".into());
    }
    let generator = block.transactions[0].generator;
    let mut tx_digests = BTreeSet::new();
    for t in &block.transactions {
        if t.generator != generator {
            return Err("transactions from more than one generator".into());
        }
        if !tx_digests.insert(t.digest) {
            return Err("duplicate transaction".into());
        }
        t.verify_with_receipts().map_err(|e| e.to_string())?;
        if t.receipts.is_empty() {
            return Err("transaction without receipts".into());
        }
    }
    let mut creators = BTreeSet::new();
    for c in &block.confirmations {
        if !creators.insert(c.creator) {
            return Err("duplicate confirmation creator".into());
        }
        c.verify_against(block).map_err(|e| e.to_string())?;
    }
    let coverage = confirmation_coverage(block, &block.confirmations);
    if coverage < genesis.protocol.confirmation_threshold {
        return Err(format!("confirmation coverage {coverage:.3} below threshold"));
    }
    Ok(())
}

/// Walks the chain checking digest links, the genesis reference, block
/// heights and every signature. The first block links to the genesis digest.
pub fn verify_chain(chain: &[Block], genesis: &GenesisBlock) -> Result<(), ChainFault> {
    if !genesis.is_consistent() {
        return Err(ChainFault {
            index: 0,
            height: 0,
            reason: "genesis block digest does not match its content".into(),
        });
    }
    let mut expected_prev = genesis.genesis_digest;
    for (index, block) in chain.iter().enumerate() {
        let fault = |reason: String| ChainFault {
            index,
            height: block.height,
            reason,
        };
        if block.height != index as u64 + 1 {
            return Err(fault(format!("expected height {}", index + 1)));
        }
        verify_block(block, &expected_prev, genesis).map_err(fault)?;
        expected_prev = block.final_digest.expect("checked final");
    }
    Ok(())
}
