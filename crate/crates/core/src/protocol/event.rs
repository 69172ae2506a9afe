use serde::Serialize;

use crate::crypto::{Address, Digest};

/// What a node did while handling one input. Drivers stamp these with time
/// and node id and write them out as JSON lines.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NodeEvent {
    Trained {
        transaction: Digest,
        self_accuracy: f64,
        poisoned: bool,
    },
    Received {
        kind: &'static str,
        digest: Digest,
    },
    Dropped {
        kind: &'static str,
        digest: Digest,
        cause: String,
    },
    Receipted {
        transaction: Digest,
        generator: Address,
        accuracy: f64,
        received_at_ttl: u32,
    },
    ModelUpdated {
        round: u64,
        policy: String,
        self_accuracy: f64,
    },
    BlockDrafted {
        height: u64,
        draft: Digest,
        transactions: usize,
        receipts: usize,
    },
    BlockFinalized {
        height: u64,
        final_digest: Digest,
        confirmed: usize,
        receipts: usize,
    },
    DraftRetried {
        height: u64,
        coverage: f64,
    },
    DraftAbandoned {
        height: u64,
        coverage: f64,
    },
    Halted {
        error: String,
    },
}
