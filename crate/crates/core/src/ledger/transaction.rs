use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::LedgerError;
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};
use crate::crypto::{self, hash, Address, Digest, NodeIdentity, PublicKey, Signature};
use crate::model::ModelParams;

/// A signed model snapshot plus the receipts appended by receivers.
///
/// `digest` covers `generator`, `create_time`, `expire_time`, `ml_model` and
/// `ttl` only, so appending receipts never changes it. The generator's
/// public key travels alongside so receivers can check both the signature
/// and that the key hashes to `generator`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transaction {
    pub generator: Address,
    pub generator_key: PublicKey,
    pub create_time: u64,
    pub expire_time: u64,
    pub ml_model: Arc<ModelParams>,
    pub ttl: u32,
    pub receipts: Vec<Receipt>,
    pub digest: Digest,
    pub signature: Signature,
}

/// A receiver's signed accuracy measurement of one transaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receipt {
    pub creator: Address,
    pub creator_key: PublicKey,
    pub transaction_digest: Digest,
    pub received_at_ttl: u32,
    pub accuracy: f64,
    pub signature: Signature,
}

pub(crate) fn transaction_digest(
    generator: &Address,
    create_time: u64,
    expire_time: u64,
    ml_model: &ModelParams,
    ttl: u32,
) -> Digest {
    let mut w = Writer::with_capacity(ml_model.parameter_count() * 8 + 128);
    generator.encode(&mut w);
    w.u64(create_time).u64(expire_time);
    ml_model.encode(&mut w);
    w.u32(ttl);
    hash(w.as_slice())
}

impl Transaction {
    pub fn compute_digest(&self) -> Digest {
        transaction_digest(
            &self.generator,
            self.create_time,
            self.expire_time,
            &self.ml_model,
            self.ttl,
        )
    }

    pub fn is_expired(&self, now: u64) -> bool {
        self.expire_time < now
    }

    pub fn receipt_by(&self, creator: &Address) -> Option<&Receipt> {
        self.receipts.iter().find(|r| &r.creator == creator)
    }

    /// Appends a receipt. The digest is unaffected.
    pub fn append_receipt(&mut self, receipt: Receipt) {
        self.receipts.push(receipt);
    }

    /// Checks digest, key/address binding, signature and time ordering.
    /// Receipts are checked separately.
    pub fn verify(&self) -> Result<(), LedgerError> {
        if self.compute_digest() != self.digest {
            return Err(LedgerError::BadDigest("transaction"));
        }
        if Address::of(&self.generator_key) != self.generator {
            return Err(LedgerError::AddressMismatch("transaction generator"));
        }
        if !crypto::verify(&self.generator_key, &self.digest, &self.signature)? {
            return Err(LedgerError::BadSignature("transaction"));
        }
        if self.create_time >= self.expire_time {
            return Err(LedgerError::InvalidLifetime);
        }
        Ok(())
    }

    /// Verifies the transaction and every receipt attached to it.
    pub fn verify_with_receipts(&self) -> Result<(), LedgerError> {
        self.verify()?;
        for r in &self.receipts {
            r.verify_for(&self.digest)?;
        }
        Ok(())
    }
}

pub(crate) fn receipt_digest(
    creator: &Address,
    transaction_digest: &Digest,
    received_at_ttl: u32,
    accuracy: f64,
) -> Digest {
    let mut w = Writer::new();
    creator.encode(&mut w);
    transaction_digest.encode(&mut w);
    w.u32(received_at_ttl).f64(accuracy);
    hash(w.as_slice())
}

impl Receipt {
    /// Digest of the signed receipt content; confirmations refer to receipts
    /// by this value.
    pub fn digest(&self) -> Digest {
        receipt_digest(
            &self.creator,
            &self.transaction_digest,
            self.received_at_ttl,
            self.accuracy,
        )
    }

    pub fn verify(&self) -> Result<(), LedgerError> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(LedgerError::AccuracyRange(self.accuracy));
        }
        if Address::of(&self.creator_key) != self.creator {
            return Err(LedgerError::AddressMismatch("receipt creator"));
        }
        if !crypto::verify(&self.creator_key, &self.digest(), &self.signature)? {
            return Err(LedgerError::BadSignature("receipt"));
        }
        Ok(())
    }

    pub fn verify_for(&self, transaction_digest: &Digest) -> Result<(), LedgerError> {
        if &self.transaction_digest != transaction_digest {
            return Err(LedgerError::ForeignReceipt);
        }
        self.verify()
    }
}

/// Builds and signs a transaction carrying `model`, expiring at
/// `now + lifetime`.
pub fn create_transaction(
    identity: &NodeIdentity,
    model: Arc<ModelParams>,
    ttl: u32,
    now: u64,
    lifetime: u64,
) -> Result<Transaction, LedgerError> {
    if ttl == 0 {
        return Err(LedgerError::ZeroTtl);
    }
    if lifetime == 0 {
        return Err(LedgerError::InvalidLifetime);
    }
    let expire_time = now.checked_add(lifetime).ok_or(LedgerError::InvalidLifetime)?;
    let generator = *identity.address();
    let digest = transaction_digest(&generator, now, expire_time, &model, ttl);
    Ok(Transaction {
        generator,
        generator_key: *identity.public_key(),
        create_time: now,
        expire_time,
        ml_model: model,
        ttl,
        receipts: Vec::new(),
        digest,
        signature: crypto::sign(identity, &digest),
    })
}

/// Hop budget left for the next receiver:
/// `min(ttl, min over receipts of received_at_ttl) - 1`, where an empty
/// receipt list contributes no bound.
pub fn compute_received_at_ttl(transaction: &Transaction) -> Result<u32, LedgerError> {
    let bound = transaction
        .receipts
        .iter()
        .map(|r| r.received_at_ttl)
        .fold(transaction.ttl, u32::min);
    bound.checked_sub(1).ok_or(LedgerError::TtlExhausted)
}

/// Measures-and-signs step performed by a receiver.
pub fn create_receipt(
    identity: &NodeIdentity,
    transaction: &Transaction,
    measured_accuracy: f64,
    now: u64,
) -> Result<Receipt, LedgerError> {
    if !(0.0..=1.0).contains(&measured_accuracy) {
        return Err(LedgerError::AccuracyRange(measured_accuracy));
    }
    if transaction.is_expired(now) {
        return Err(LedgerError::Expired {
            expire_time: transaction.expire_time,
            now,
        });
    }
    if transaction.receipt_by(identity.address()).is_some() {
        return Err(LedgerError::DuplicateReceipt);
    }
    let received_at_ttl = compute_received_at_ttl(transaction)?;
    let creator = *identity.address();
    let digest = receipt_digest(
        &creator,
        &transaction.digest,
        received_at_ttl,
        measured_accuracy,
    );
    Ok(Receipt {
        creator,
        creator_key: *identity.public_key(),
        transaction_digest: transaction.digest,
        received_at_ttl,
        accuracy: measured_accuracy,
        signature: crypto::sign(identity, &digest),
    })
}

impl Encode for Receipt {
    fn encode(&self, w: &mut Writer) {
        self.creator.encode(w);
        self.creator_key.encode(w);
        self.transaction_digest.encode(w);
        w.u32(self.received_at_ttl).f64(self.accuracy);
        self.signature.encode(w);
    }
}

impl Decode for Receipt {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Receipt {
            creator: Address::decode(r)?,
            creator_key: PublicKey::decode(r)?,
            transaction_digest: Digest::decode(r)?,
            received_at_ttl: r.u32()?,
            accuracy: r.f64()?,
            signature: Signature::decode(r)?,
        })
    }
}

impl Encode for Transaction {
    fn encode(&self, w: &mut Writer) {
        self.generator.encode(w);
        self.generator_key.encode(w);
        w.u64(self.create_time).u64(self.expire_time);
        self.ml_model.encode(w);
        w.u32(self.ttl);
        w.u32(self.receipts.len() as u32);
        for r in &self.receipts {
            r.encode(w);
        }
        self.digest.encode(w);
        self.signature.encode(w);
    }
}

impl Decode for Transaction {
    fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let generator = Address::decode(r)?;
        let generator_key = PublicKey::decode(r)?;
        let create_time = r.u64()?;
        let expire_time = r.u64()?;
        let ml_model = Arc::new(ModelParams::decode(r)?);
        let ttl = r.u32()?;
        let n = r.count(64)?;
        let receipts = (0..n).map(|_| Receipt::decode(r)).collect::<Result<_, _>>()?;
        Ok(Transaction {
            generator,
            generator_key,
            create_time,
            expire_time,
            ml_model,
            ttl,
            receipts,
            digest: Digest::decode(r)?,
            signature: Signature::decode(r)?,
        })
    }
}
