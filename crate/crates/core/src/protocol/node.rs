use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::{Message, MessageKind, NodeEvent, Outgoing};
use crate::crypto::{Address, Digest, NodeIdentity};
use crate::data::{poison_model, NodeBehavior};
use crate::ledger::{
    compute_received_at_ttl, confirm_block, confirmation_coverage, create_receipt,
    create_transaction, draft_block, finalize_block, Block, Confirmation, ConfirmationLog,
    GenesisBlock, LedgerError, Receipt, Transaction,
};
use crate::model::{
    evaluate, half_fedavg, train_step, weighted_fedavg, Architecture, BufferEntry,
    FedAvgBuffer, LabeledSample, ModelError, ModelParams,
};
use crate::profiler::{Category, Profiler};
use crate::reputation::{policy_by_name, ReputationPolicy, ReputationTable, UnknownPolicy};
use crate::rng::StreamRng;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Policy(#[from] UnknownPolicy),
    #[error("genesis block digest does not match its content")]
    Genesis,
    #[error("the local test slice must not be empty")]
    EmptyTestSlice,
    #[error("initial model does not match the genesis architecture")]
    InitialModel,
}

/// Per-node settings that are not part of the shared genesis block.
#[derive(Debug, Clone)]
pub struct NodeConfig {
    pub genesis: GenesisBlock,
    pub policy: String,
    pub behavior: NodeBehavior,
    /// Build blocks. When off, transactions and receipts are still signed but
    /// nothing is drafted or confirmed.
    pub ledger: bool,
    /// Time a draft waits for confirmations before it is finalized with what
    /// it has, retried once, or abandoned.
    pub confirmation_timeout: u64,
    pub record_events: bool,
}

impl NodeConfig {
    pub fn new(genesis: GenesisBlock) -> Self {
        Self {
            genesis,
            policy: crate::reputation::POLICY_HALF_FEDAVG.to_string(),
            behavior: NodeBehavior::Honest,
            ledger: true,
            confirmation_timeout: 5,
            record_events: true,
        }
    }
}

/// Counters a driver can read without parsing the event log.
#[derive(Debug, Clone, Default, Serialize)]
pub struct NodeStats {
    pub trainings: u64,
    pub receipts_issued: u64,
    pub updates: u64,
    pub blocks_finalized: u64,
    pub drafts_retried: u64,
    pub drafts_abandoned: u64,
    pub messages_dropped: u64,
    pub last_self_accuracy: Option<f64>,
    /// Update rounds in which each generator's model was averaged in.
    pub rounds_observed: BTreeMap<Address, u64>,
    /// Update round (1-based) at which a generator's reputation first hit 0.
    pub reputation_zero_round: BTreeMap<Address, u64>,
    /// How many of those rounds included the generator's model.
    pub reputation_zero_observed: BTreeMap<Address, u64>,
}

struct OpenDraft {
    block: Block,
    confirmations: Vec<Confirmation>,
    deadline: u64,
    retried: bool,
}

pub struct Node {
    identity: NodeIdentity,
    config: NodeConfig,
    arch: Architecture,
    policy: Box<dyn ReputationPolicy>,
    model: Arc<ModelParams>,
    data_queue: Vec<LabeledSample>,
    buffer: FedAvgBuffer,
    reputation: ReputationTable,
    pending: Vec<Transaction>,
    open_draft: Option<OpenDraft>,
    chain: Vec<Block>,
    seen: HashSet<Digest>,
    third_party_receipts: HashMap<Digest, Vec<Receipt>>,
    peers: BTreeSet<Address>,
    confirmation_log: ConfirmationLog,
    test_slice: Vec<LabeledSample>,
    attack_rng: StreamRng,
    profiler: Arc<Profiler>,
    events: Vec<NodeEvent>,
    halted: Option<String>,
    stats: NodeStats,
}

impl Node {
    pub fn new(
        identity: NodeIdentity,
        config: NodeConfig,
        model: ModelParams,
        test_slice: Vec<LabeledSample>,
        attack_rng: StreamRng,
    ) -> Result<Self, ProtocolError> {
        if !config.genesis.is_consistent() {
            return Err(ProtocolError::Genesis);
        }
        if test_slice.is_empty() {
            return Err(ProtocolError::EmptyTestSlice);
        }
        let arch = Architecture::parse(&config.genesis.model_architecture)?;
        arch.check(&model).map_err(|_| ProtocolError::InitialModel)?;
        let policy = policy_by_name(&config.policy)?;
        let capacity = config.genesis.protocol.fedavg_buffer_size.max(1) as usize;
        Ok(Self {
            identity,
            arch,
            policy,
            model: Arc::new(model),
            data_queue: Vec::new(),
            buffer: FedAvgBuffer::new(capacity),
            reputation: ReputationTable::new(),
            pending: Vec::new(),
            open_draft: None,
            chain: Vec::new(),
            seen: HashSet::new(),
            third_party_receipts: HashMap::new(),
            peers: BTreeSet::new(),
            confirmation_log: ConfirmationLog::new(),
            test_slice,
            attack_rng,
            profiler: Arc::new(Profiler::new()),
            events: Vec::new(),
            halted: None,
            stats: NodeStats::default(),
            config,
        })
    }

    pub fn with_profiler(mut self, profiler: Arc<Profiler>) -> Self {
        self.profiler = profiler;
        self
    }

    pub fn identity(&self) -> &NodeIdentity {
        &self.identity
    }

    pub fn address(&self) -> &Address {
        self.identity.address()
    }

    pub fn behavior(&self) -> NodeBehavior {
        self.config.behavior
    }

    pub fn genesis(&self) -> &GenesisBlock {
        &self.config.genesis
    }

    pub fn model(&self) -> &ModelParams {
        &self.model
    }

    pub fn chain(&self) -> &[Block] {
        &self.chain
    }

    pub fn reputation(&self) -> &ReputationTable {
        &self.reputation
    }

    pub fn stats(&self) -> &NodeStats {
        &self.stats
    }

    pub fn halted(&self) -> Option<&str> {
        self.halted.as_deref()
    }

    pub fn queued_samples(&self) -> usize {
        self.data_queue.len()
    }

    pub fn pending_transactions(&self) -> &[Transaction] {
        &self.pending
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn has_open_draft(&self) -> bool {
        self.open_draft.is_some()
    }

    pub fn has_seen(&self, digest: &Digest) -> bool {
        self.seen.contains(digest)
    }

    pub fn third_party_receipts(&self, transaction: &Digest) -> &[Receipt] {
        self.third_party_receipts
            .get(transaction)
            .map_or(&[], Vec::as_slice)
    }

    pub fn peers(&self) -> &BTreeSet<Address> {
        &self.peers
    }

    pub fn add_peer(&mut self, peer: Address) {
        if &peer != self.address() {
            self.peers.insert(peer);
        }
    }

    pub fn remove_peer(&mut self, peer: &Address) {
        self.peers.remove(peer);
    }

    #[cfg(test)]
    pub(crate) fn config_mut_for_tests(&mut self) -> &mut NodeConfig {
        &mut self.config
    }

    pub fn take_events(&mut self) -> Vec<NodeEvent> {
        std::mem::take(&mut self.events)
    }

    fn event(&mut self, e: NodeEvent) {
        if self.config.record_events {
            self.events.push(e);
        }
    }

    fn drop_msg(&mut self, kind: MessageKind, digest: Digest, cause: impl ToString) {
        self.stats.messages_dropped += 1;
        let cause = cause.to_string();
        log::debug!("{} dropped {} {}: {cause}", self.address(), kind.name(), digest);
        self.event(NodeEvent::Dropped {
            kind: kind.name(),
            digest,
            cause,
        });
    }

    fn halt(&mut self, error: impl ToString) {
        let error = error.to_string();
        log::error!("{} halted: {error}", self.address());
        self.event(NodeEvent::Halted {
            error: error.clone(),
        });
        self.halted = Some(error);
    }

    fn accuracy(&self, model: &ModelParams) -> f64 {
        // The architecture was checked on the way in, so evaluation cannot
        // fail on shape; fall back to zero rather than panic.
        evaluate(model, &self.test_slice).unwrap_or(0.0)
    }

    /// Queues freshly collected samples and trains once a full batch is
    /// available. Observers discard their data.
    pub fn on_data(&mut self, samples: Vec<LabeledSample>, now: u64) -> Vec<Outgoing> {
        if self.halted.is_some() || !self.config.behavior.trains() {
            return Vec::new();
        }
        self.data_queue.extend(samples);
        let batch_size = self.config.genesis.hyperparameters.train_batch_size.max(1) as usize;
        let mut out = Vec::new();
        while self.data_queue.len() >= batch_size && self.halted.is_none() {
            let batch: Vec<_> = self.data_queue.drain(..batch_size).collect();
            out.extend(self.train_and_broadcast(&batch, now));
        }
        out.extend(self.maybe_generate_block(now));
        out
    }

    fn train_and_broadcast(&mut self, batch: &[LabeledSample], now: u64) -> Option<Outgoing> {
        let lr = self.config.genesis.hyperparameters.learning_rate;
        let trained = match train_step(&self.model, batch, lr) {
            Ok(m) => Arc::new(m),
            Err(e) => {
                self.halt(format!("training failed: {e}"));
                return None;
            }
        };
        self.model = trained;
        self.stats.trainings += 1;
        let profiler = self.profiler.clone();
        let self_accuracy = profiler.time(Category::MeasureAccuracy, || self.accuracy(&self.model));
        self.stats.last_self_accuracy = Some(self_accuracy);

        let poisoned = self.config.behavior == NodeBehavior::ModelPoisoner;
        let shared = if poisoned {
            Arc::new(poison_model(&self.arch, &mut self.attack_rng))
        } else {
            self.model.clone()
        };
        let p = &self.config.genesis.protocol;
        let (ttl, lifetime) = (p.initial_ttl, p.transaction_lifetime);
        let tx = match profiler.time(Category::BlockchainOverheadTx, || {
            create_transaction(&self.identity, shared, ttl, now, lifetime)
        }) {
            Ok(t) => t,
            Err(e) => {
                self.halt(format!("cannot create transaction: {e}"));
                return None;
            }
        };
        self.seen.insert(tx.digest);
        self.event(NodeEvent::Trained {
            transaction: tx.digest,
            self_accuracy,
            poisoned,
        });
        if self.config.ledger {
            self.pending.push(tx.clone());
        }
        Some(Outgoing::all(Message::Transaction(tx)))
    }

    /// Handles one message from a peer.
    pub fn on_message(&mut self, message: Message, now: u64) -> Vec<Outgoing> {
        if self.halted.is_some() {
            return Vec::new();
        }
        let kind = message.kind();
        match message {
            Message::Transaction(tx) | Message::ReceiptedTransaction(tx) => {
                if &tx.generator == self.address() {
                    self.merge_receipts(tx, now)
                } else {
                    self.on_transaction(kind, tx, now)
                }
            }
            Message::DraftBlock(b) => self.on_draft_block(b).into_iter().collect(),
            Message::Confirmation(c) => self.on_confirmation(c, now),
        }
    }

    fn on_transaction(&mut self, kind: MessageKind, tx: Transaction, now: u64) -> Vec<Outgoing> {
        if self.seen.contains(&tx.digest) {
            if kind == MessageKind::ReceiptedTransaction {
                self.store_third_party_receipts(&tx);
            }
            self.drop_msg(kind, tx.digest, "already processed");
            return Vec::new();
        }
        if tx.is_expired(now) {
            self.drop_msg(kind, tx.digest, "expired");
            return Vec::new();
        }
        let profiler = self.profiler.clone();
        let checked = profiler.time(Category::BlockchainOverheadReceive, || {
            if kind == MessageKind::ReceiptedTransaction {
                tx.verify_with_receipts()?;
            } else {
                tx.verify()?;
            }
            compute_received_at_ttl(&tx)
        });
        let received_at_ttl = match checked {
            Ok(v) => v,
            // Not marked as seen: a fresher copy with hops left may follow.
            Err(e) => {
                self.drop_msg(kind, tx.digest, e);
                return Vec::new();
            }
        };
        if let Err(e) = self.arch.check(&tx.ml_model) {
            self.seen.insert(tx.digest);
            self.drop_msg(kind, tx.digest, e);
            return Vec::new();
        }
        self.event(NodeEvent::Received {
            kind: kind.name(),
            digest: tx.digest,
        });

        let accuracy = profiler.time(Category::CalculateAccuracy, || self.accuracy(&tx.ml_model));
        let receipt = match profiler.time(Category::BlockchainOverheadReceive, || {
            create_receipt(&self.identity, &tx, accuracy, now)
        }) {
            Ok(r) => r,
            Err(e) => {
                self.drop_msg(kind, tx.digest, e);
                return Vec::new();
            }
        };
        self.seen.insert(tx.digest);
        self.stats.receipts_issued += 1;
        self.event(NodeEvent::Receipted {
            transaction: tx.digest,
            generator: tx.generator,
            accuracy,
            received_at_ttl,
        });
        if kind == MessageKind::ReceiptedTransaction {
            self.store_third_party_receipts(&tx);
        }

        if let Err(e) = self.buffer.insert(BufferEntry {
            generator: tx.generator,
            model: tx.ml_model.clone(),
            accuracy,
            create_time: tx.create_time,
        }) {
            log::warn!("{} could not buffer model: {e}", self.address());
        }

        let generator = tx.generator;
        let mut forwarded = tx;
        forwarded.append_receipt(receipt);
        let message = Message::ReceiptedTransaction(forwarded);
        // With hops left the receipted copy floods onward; otherwise it only
        // goes back to the generator.
        let out = if received_at_ttl >= 1 {
            Outgoing::all(message)
        } else {
            Outgoing::to(generator, message)
        };
        if self.buffer.is_full() {
            self.update_model();
        }
        vec![out]
    }

    fn store_third_party_receipts(&mut self, tx: &Transaction) {
        let me = *self.address();
        let stored = self.third_party_receipts.entry(tx.digest).or_default();
        for r in &tx.receipts {
            if r.creator != me && !stored.iter().any(|s| s.creator == r.creator) {
                stored.push(r.clone());
            }
        }
    }

    /// Receipts for this node's own transaction arriving back.
    fn merge_receipts(&mut self, tx: Transaction, now: u64) -> Vec<Outgoing> {
        let kind = MessageKind::ReceiptedTransaction;
        let Some(pos) = self.pending.iter().position(|p| p.digest == tx.digest) else {
            let cause = if self.config.ledger {
                "transaction no longer pending"
            } else {
                "ledger disabled"
            };
            self.drop_msg(kind, tx.digest, cause);
            return Vec::new();
        };
        let profiler = self.profiler.clone();
        let mut added = 0;
        for r in tx.receipts {
            if self.pending[pos].receipt_by(&r.creator).is_some() {
                continue;
            }
            match profiler.time(Category::BlockchainOverheadReceive, || r.verify_for(&tx.digest)) {
                Ok(()) => {
                    self.pending[pos].append_receipt(r);
                    added += 1;
                }
                Err(e) => self.drop_msg(kind, tx.digest, format!("bad receipt: {e}")),
            }
        }
        if added > 0 {
            self.event(NodeEvent::Received {
                kind: kind.name(),
                digest: tx.digest,
            });
        }
        self.maybe_generate_block(now)
    }

    fn update_model(&mut self) {
        let observations = self.buffer.observations();
        let profiler = self.profiler.clone();
        let weighted = self.policy.weighted();
        if weighted {
            self.reputation = profiler.time(Category::BlockchainOverheadUpdate, || {
                self.policy.update(&self.reputation, &observations)
            });
        }
        let next = if weighted {
            weighted_fedavg(&self.buffer, &self.reputation, &self.model)
        } else {
            half_fedavg(&self.buffer, &self.model)
        };
        self.buffer.clear();
        match next {
            Ok(m) => self.model = Arc::new(m),
            Err(e) => {
                self.halt(format!("model update failed: {e}"));
                return;
            }
        }
        self.stats.updates += 1;
        let round = self.stats.updates;
        let generators: BTreeSet<Address> = observations.iter().map(|(a, _)| *a).collect();
        for addr in generators {
            let seen = self.stats.rounds_observed.entry(addr).or_default();
            *seen += 1;
            let seen = *seen;
            if self.reputation.get(&addr) == 0.0 && !self.stats.reputation_zero_round.contains_key(&addr) {
                self.stats.reputation_zero_round.insert(addr, round);
                self.stats.reputation_zero_observed.insert(addr, seen);
            }
        }
        let self_accuracy = profiler.time(Category::CalculateSelfAccuracy, || self.accuracy(&self.model));
        self.stats.last_self_accuracy = Some(self_accuracy);
        self.event(NodeEvent::ModelUpdated {
            round,
            policy: self.policy.name().to_string(),
            self_accuracy,
        });
    }

    /// A pending transaction stops waiting for receipts once every current
    /// peer has answered, a newer own transaction exists, or it expired.
    fn settled(&self, index: usize, now: u64) -> bool {
        let tx = &self.pending[index];
        index + 1 < self.pending.len()
            || tx.is_expired(now)
            || (!self.peers.is_empty() && self.peers.iter().all(|p| tx.receipt_by(p).is_some()))
    }

    /// Drafts a block from the oldest settled transactions once enough of
    /// them are available.
    pub fn maybe_generate_block(&mut self, now: u64) -> Vec<Outgoing> {
        if !self.config.ledger || self.open_draft.is_some() || self.halted.is_some() {
            return Vec::new();
        }
        // Transactions nobody receipted get the generator's own receipt, so a
        // node cut off from its peers still extends its chain.
        for i in 0..self.pending.len() {
            if !self.settled(i, now) {
                break;
            }
            if self.pending[i].receipts.is_empty() {
                let tx = &self.pending[i];
                let acc = self.accuracy(&tx.ml_model);
                match create_receipt(&self.identity, tx, acc, tx.create_time) {
                    Ok(r) => self.pending[i].append_receipt(r),
                    Err(e) => log::warn!("{} cannot self-receipt: {e}", self.address()),
                }
            }
        }
        let per_block = self.config.genesis.protocol.transactions_per_block.max(1) as usize;
        if self.pending.len() < per_block || !(0..per_block).all(|i| self.settled(i, now)) {
            return Vec::new();
        }
        let txs: Vec<Transaction> = self.pending.drain(..per_block).collect();
        let height = self.chain.last().map_or(1, |b| b.height + 1);
        let prev = self
            .chain
            .last()
            .and_then(|b| b.final_digest)
            .unwrap_or(self.config.genesis.genesis_digest);
        let profiler = self.profiler.clone();
        let drafted = profiler.time(Category::BlockchainOverheadBlock, || {
            draft_block(&self.identity, txs, height, prev, self.config.genesis.genesis_digest)
        });
        let block = match drafted {
            Ok(b) => b,
            Err(e) => {
                log::warn!("{} could not draft block {height}: {e}", self.address());
                return Vec::new();
            }
        };
        let mut confirmations = Vec::new();
        if let Ok(own) = confirm_block(&self.identity, &block, &mut self.confirmation_log) {
            confirmations.push(own);
        }
        self.event(NodeEvent::BlockDrafted {
            height,
            draft: block.draft_digest,
            transactions: block.transactions.len(),
            receipts: block.receipt_count(),
        });
        let mut out = vec![Outgoing::all(Message::DraftBlock(block.clone()))];
        let complete = confirmation_coverage(&block, &confirmations) >= 1.0;
        self.open_draft = Some(OpenDraft {
            block,
            confirmations,
            deadline: now.saturating_add(self.config.confirmation_timeout),
            retried: false,
        });
        if complete {
            out.extend(self.finalize(now));
        }
        out
    }

    fn on_draft_block(&mut self, block: Block) -> Option<Outgoing> {
        let kind = MessageKind::DraftBlock;
        let digest = block.draft_digest;
        let profiler = self.profiler.clone();
        let checked: Result<Address, String> = profiler.time(Category::BlockchainOverheadBlock, || {
            if block.genesis_digest != self.config.genesis.genesis_digest {
                return Err("foreign genesis".to_string());
            }
            if block.is_final() {
                return Err("block is already final".to_string());
            }
            let generator = block
                .transactions
                .first()
                .map(|t| t.generator)
                .ok_or_else(|| "empty draft".to_string())?;
            for t in &block.transactions {
                if t.generator != generator {
                    return Err(LedgerError::ForeignTransaction.to_string());
                }
                t.verify().map_err(|e| e.to_string())?;
            }
            Ok(generator)
        });
        let generator = match checked {
            Ok(g) => g,
            Err(cause) => {
                self.drop_msg(kind, digest, cause);
                return None;
            }
        };
        self.event(NodeEvent::Received {
            kind: kind.name(),
            digest,
        });
        let confirmed = profiler.time(Category::BlockchainOverheadBlock, || {
            confirm_block(&self.identity, &block, &mut self.confirmation_log)
        });
        match confirmed {
            Ok(c) => Some(Outgoing::to(generator, Message::Confirmation(c))),
            // A retried draft gets the confirmation this node already issued.
            Err(LedgerError::AlreadyConfirmed) => self
                .confirmation_log
                .previous(&digest)
                .cloned()
                .map(|c| Outgoing::to(generator, Message::Confirmation(c))),
            Err(e) => {
                self.drop_msg(kind, digest, e);
                None
            }
        }
    }

    fn on_confirmation(&mut self, confirmation: Confirmation, now: u64) -> Vec<Outgoing> {
        let kind = MessageKind::Confirmation;
        let digest = confirmation.digest();
        let profiler = self.profiler.clone();
        let verdict = profiler.time(Category::GatherConfirmation, || {
            let Some(open) = self.open_draft.as_mut() else {
                return Err("no open draft".to_string());
            };
            if confirmation.draft_digest != open.block.draft_digest {
                return Err("confirmation for another draft".to_string());
            }
            if open
                .confirmations
                .iter()
                .any(|c| c.creator == confirmation.creator)
            {
                return Err("duplicate confirmation".to_string());
            }
            confirmation
                .verify_against(&open.block)
                .map_err(|e| e.to_string())?;
            open.confirmations.push(confirmation);
            Ok(confirmation_coverage(&open.block, &open.confirmations))
        });
        match verdict {
            Ok(coverage) => {
                self.event(NodeEvent::Received {
                    kind: kind.name(),
                    digest,
                });
                if coverage >= 1.0 {
                    return self.finalize(now);
                }
                Vec::new()
            }
            Err(cause) => {
                self.drop_msg(kind, digest, cause);
                Vec::new()
            }
        }
    }

    fn finalize(&mut self, now: u64) -> Vec<Outgoing> {
        let Some(open) = self.open_draft.take() else {
            return Vec::new();
        };
        let threshold = self.config.genesis.protocol.confirmation_threshold;
        let profiler = self.profiler.clone();
        match profiler.time(Category::BlockchainOverheadBlock, || {
            finalize_block(&open.block, &open.confirmations, threshold)
        }) {
            Ok(block) => {
                self.stats.blocks_finalized += 1;
                self.event(NodeEvent::BlockFinalized {
                    height: block.height,
                    final_digest: block.final_digest.expect("finalized"),
                    confirmed: block.confirmed_receipt_count(),
                    receipts: block.receipt_count(),
                });
                log::info!(
                    "{} finalized block {} ({}/{} receipts confirmed)",
                    self.address(),
                    block.height,
                    block.confirmed_receipt_count(),
                    block.receipt_count()
                );
                self.chain.push(block);
                self.maybe_generate_block(now)
            }
            Err(e) => {
                log::warn!("{} cannot finalize: {e}", self.address());
                self.open_draft = Some(open);
                Vec::new()
            }
        }
    }

    /// Advances timers: drafts past their deadline are finalized if they
    /// reached the threshold, otherwise re-sent once and then abandoned.
    pub fn on_tick(&mut self, now: u64) -> Vec<Outgoing> {
        if self.halted.is_some() {
            return Vec::new();
        }
        let Some(open) = self.open_draft.as_mut() else {
            return self.maybe_generate_block(now);
        };
        if now < open.deadline {
            return Vec::new();
        }
        let coverage = confirmation_coverage(&open.block, &open.confirmations);
        let height = open.block.height;
        if coverage >= self.config.genesis.protocol.confirmation_threshold {
            return self.finalize(now);
        }
        if !open.retried {
            open.retried = true;
            open.deadline = now.saturating_add(self.config.confirmation_timeout);
            let resend = Outgoing::all(Message::DraftBlock(open.block.clone()));
            self.stats.drafts_retried += 1;
            self.event(NodeEvent::DraftRetried { height, coverage });
            return vec![resend];
        }
        self.open_draft = None;
        self.stats.drafts_abandoned += 1;
        log::warn!(
            "{} abandoned draft {height}: only {coverage:.3} of receipts confirmed",
            self.address()
        );
        self.event(NodeEvent::DraftAbandoned { height, coverage });
        self.maybe_generate_block(now)
    }
}
