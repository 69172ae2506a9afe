use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{LedgerError, Transaction};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::{self, hash, Address, Digest, NodeIdentity, PublicKey, Signature};

/// A batch of receipted transactions. Drafts have no confirmations and no
/// `final_digest`; finalized blocks carry both and are immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub height: u64,
    pub prev_final_digest: Digest,
    pub genesis_digest: Digest,
    pub transactions: Vec<Transaction>,
    pub draft_digest: Digest,
    pub confirmations: Vec<Confirmation>,
    pub final_digest: Option<Digest>,
}

/// A neighbor's signed endorsement of its own receipts inside a draft.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confirmation {
    pub creator: Address,
    pub creator_key: PublicKey,
    pub draft_digest: Digest,
    pub confirmed_receipt_digests: Vec<Digest>,
    pub signature: Signature,
}

fn encode_draft_fields(
    w: &mut Writer,
    height: u64,
    prev_final_digest: &Digest,
    genesis_digest: &Digest,
    transactions: &[Transaction],
) {
    w.u64(height);
    prev_final_digest.encode(w);
    genesis_digest.encode(w);
    w.u32(transactions.len() as u32);
    for t in transactions {
        t.encode(w);
    }
}

impl Block {
    pub fn compute_draft_digest(&self) -> Digest {
        let mut w = Writer::new();
        encode_draft_fields(
            &mut w,
            self.height,
            &self.prev_final_digest,
            &self.genesis_digest,
            &self.transactions,
        );
        hash(w.as_slice())
    }

    pub fn compute_final_digest(&self) -> Digest {
        let mut w = Writer::new();
        self.draft_digest.encode(&mut w);
        w.u32(self.confirmations.len() as u32);
        for c in &self.confirmations {
            c.encode(&mut w);
        }
        hash(w.as_slice())
    }

    pub fn is_final(&self) -> bool {
        self.final_digest.is_some()
    }

    pub fn receipt_count(&self) -> usize {
        self.transactions.iter().map(|t| t.receipts.len()).sum()
    }

    /// Distinct receipt digests endorsed by the embedded confirmations.
    pub fn confirmed_receipt_count(&self) -> usize {
        self.confirmations
            .iter()
            .flat_map(|c| c.confirmed_receipt_digests.iter())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// Receipt digest -> creator, for every receipt in the block.
    fn receipt_index(&self) -> HashMap<Digest, Address> {
        self.transactions
            .iter()
            .flat_map(|t| t.receipts.iter())
            .map(|r| (r.digest(), r.creator))
            .collect()
    }
}

fn confirmation_digest(creator: &Address, draft_digest: &Digest, receipts: &[Digest]) -> Digest {
    let mut w = Writer::new();
    creator.encode(&mut w);
    draft_digest.encode(&mut w);
    w.u32(receipts.len() as u32);
    for d in receipts {
        d.encode(&mut w);
    }
    hash(w.as_slice())
}

impl Confirmation {
    pub fn digest(&self) -> Digest {
        confirmation_digest(&self.creator, &self.draft_digest, &self.confirmed_receipt_digests)
    }

    pub fn verify(&self) -> Result<(), LedgerError> {
        if Address::of(&self.creator_key) != self.creator {
            return Err(LedgerError::AddressMismatch("confirmation creator"));
        }
        if !crypto::verify(&self.creator_key, &self.digest(), &self.signature)? {
            return Err(LedgerError::BadSignature("confirmation"));
        }
        Ok(())
    }

    /// Signature plus the requirement that every endorsed receipt exists in
    /// `draft` and was authored by this confirmation's creator.
    pub fn verify_against(&self, draft: &Block) -> Result<(), LedgerError> {
        if self.draft_digest != draft.draft_digest {
            return Err(LedgerError::InvalidConfirmation(
                "references a different draft".into(),
            ));
        }
        self.verify()?;
        let index = draft.receipt_index();
        for d in &self.confirmed_receipt_digests {
            match index.get(d) {
                Some(creator) if creator == &self.creator => {}
                Some(_) => {
                    return Err(LedgerError::InvalidConfirmation(
                        "endorses a receipt by another node".into(),
                    ))
                }
                None => {
                    return Err(LedgerError::InvalidConfirmation(
                        "endorses a receipt not in the draft".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Creates a draft block from the generator's own receipted transactions.
pub fn draft_block(
    identity: &NodeIdentity,
    pending: Vec<Transaction>,
    height: u64,
    prev_final: Digest,
    genesis: Digest,
) -> Result<Block, LedgerError> {
    if pending.is_empty() {
        return Err(LedgerError::EmptyBlock);
    }
    for t in &pending {
        if &t.generator != identity.address() {
            return Err(LedgerError::ForeignTransaction);
        }
        if t.receipts.is_empty() {
            return Err(LedgerError::UnreceiptedTransaction);
        }
    }
    let mut block = Block {
        height,
        prev_final_digest: prev_final,
        genesis_digest: genesis,
        transactions: pending,
        draft_digest: Digest::default(),
        confirmations: Vec::new(),
        final_digest: None,
    };
    block.draft_digest = block.compute_draft_digest();
    Ok(block)
}

/// Drafts this node has already confirmed. A node endorses each draft once;
/// the stored confirmation can be resent verbatim if the generator retries.
#[derive(Debug, Default, Clone)]
pub struct ConfirmationLog {
    issued: HashMap<Digest, Confirmation>,
}

impl ConfirmationLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn previous(&self, draft_digest: &Digest) -> Option<&Confirmation> {
        self.issued.get(draft_digest)
    }

    pub fn len(&self) -> usize {
        self.issued.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issued.is_empty()
    }
}

/// Endorses exactly this node's own valid receipts in `draft`.
pub fn confirm_block(
    identity: &NodeIdentity,
    draft: &Block,
    log: &mut ConfirmationLog,
) -> Result<Confirmation, LedgerError> {
    if draft.compute_draft_digest() != draft.draft_digest {
        return Err(LedgerError::BadDigest("draft block"));
    }
    if log.issued.contains_key(&draft.draft_digest) {
        return Err(LedgerError::AlreadyConfirmed);
    }
    let mut mine = Vec::new();
    for t in &draft.transactions {
        for r in t.receipts.iter().filter(|r| &r.creator == identity.address()) {
            r.verify_for(&t.digest)?;
            mine.push(r.digest());
        }
    }
    if mine.is_empty() {
        return Err(LedgerError::NothingToConfirm);
    }
    let creator = *identity.address();
    let digest = confirmation_digest(&creator, &draft.draft_digest, &mine);
    let confirmation = Confirmation {
        creator,
        creator_key: *identity.public_key(),
        draft_digest: draft.draft_digest,
        confirmed_receipt_digests: mine,
        signature: crypto::sign(identity, &digest),
    };
    log.issued.insert(draft.draft_digest, confirmation.clone());
    Ok(confirmation)
}

/// Fraction of the draft's receipts endorsed by `confirmations`.
pub fn confirmation_coverage(draft: &Block, confirmations: &[Confirmation]) -> f64 {
    let total = draft.receipt_count();
    if total == 0 {
        return 0.0;
    }
    let confirmed: BTreeSet<&Digest> = confirmations
        .iter()
        .flat_map(|c| c.confirmed_receipt_digests.iter())
        .collect();
    confirmed.len() as f64 / total as f64
}

/// Embeds confirmations and seals the block once coverage reaches
/// `threshold`. Later confirmations from an already-seen creator are ignored.
pub fn finalize_block(
    draft: &Block,
    confirmations: &[Confirmation],
    threshold: f64,
) -> Result<Block, LedgerError> {
    if draft.is_final() {
        return Err(LedgerError::InvalidDraft("block is already final".into()));
    }
    if draft.compute_draft_digest() != draft.draft_digest {
        return Err(LedgerError::BadDigest("draft block"));
    }
    let mut seen = BTreeSet::new();
    let mut accepted = Vec::new();
    for c in confirmations {
        c.verify_against(draft)?;
        if seen.insert(c.creator) {
            accepted.push(c.clone());
        }
    }
    let achieved = confirmation_coverage(draft, &accepted);
    if achieved < threshold {
        return Err(LedgerError::InsufficientConfirmations {
            achieved,
            threshold,
        });
    }
    let mut block = draft.clone();
    block.confirmations = accepted;
    block.final_digest = Some(block.compute_final_digest());
    Ok(block)
}

impl Encode for Confirmation {
    fn encode(&self, w: &mut Writer) {
        self.creator.encode(w);
        self.creator_key.encode(w);
        self.draft_digest.encode(w);
        w.u32(self.confirmed_receipt_digests.len() as u32);
        for d in &self.confirmed_receipt_digests {
            d.encode(w);
        }
        self.signature.encode(w);
    }
}

impl Decode for Confirmation {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let creator = Address::decode(r)?;
        let creator_key = PublicKey::decode(r)?;
        let draft_digest = Digest::decode(r)?;
        let n = r.count(36)?;
        let confirmed_receipt_digests = (0..n).map(|_| Digest::decode(r)).collect::<Result<_, _>>()?;
        Ok(Confirmation {
            creator,
            creator_key,
            draft_digest,
            confirmed_receipt_digests,
            signature: Signature::decode(r)?,
        })
    }
}

impl Encode for Block {
    fn encode(&self, w: &mut Writer) {
        encode_draft_fields(
            w,
            self.height,
            &self.prev_final_digest,
            &self.genesis_digest,
            &self.transactions,
        );
        self.draft_digest.encode(w);
        w.u32(self.confirmations.len() as u32);
        for c in &self.confirmations {
            c.encode(w);
        }
        match &self.final_digest {
            Some(d) => {
                w.u8(1);
                d.encode(w);
            }
            None => {
                w.u8(0);
            }
        }
    }
}

impl Decode for Block {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let height = r.u64()?;
        let prev_final_digest = Digest::decode(r)?;
        let genesis_digest = Digest::decode(r)?;
        let n = r.count(64)?;
        let transactions = (0..n).map(|_| Transaction::decode(r)).collect::<Result<_, _>>()?;
        let draft_digest = Digest::decode(r)?;
        let n = r.count(64)?;
        let confirmations = (0..n).map(|_| Confirmation::decode(r)).collect::<Result<_, _>>()?;
        let final_digest = match r.u8()? {
            0 => None,
            1 => Some(Digest::decode(r)?),
            other => {
                return Err(DecodeError::Invalid {
                    field: "final_digest",
                    reason: format!("bad presence tag {other}"),
                })
            }
        };
        Ok(Block {
            height,
            prev_final_digest,
            genesis_digest,
            transactions,
            draft_digest,
            confirmations,
            final_digest,
        })
    }
}
