#![allow(dead_code)]

use std::sync::Arc;

use dfl::crypto::{generate_identity, Address, Digest, PublicKey, Signature};
use dfl::ledger::{
    confirm_block, create_receipt, create_transaction, draft_block, finalize_block, Block, Confirmation,
    ConfirmationLog, GenesisBlock, Hyperparameters, ProtocolParams, Transaction,
};
use dfl::model::{init_model, Architecture, ModelParams};
use rand::Rng;

pub fn toy_arch() -> Architecture {
    Architecture::mlp(3, 2, 2)
}

pub fn genesis() -> GenesisBlock {
    GenesisBlock::new(toy_arch().descriptor(), Hyperparameters::default(), ProtocolParams::default())
}

/// A finalized chain of `len` blocks, two transactions each, receipted and
/// confirmed by two peers.
pub fn finalized_chain(len: u64) -> (Vec<Block>, GenesisBlock) {
    let g = genesis();
    let gen = generate_identity(Some(1));
    let peers = [generate_identity(Some(2)), generate_identity(Some(3))];
    let mut logs = [ConfirmationLog::new(), ConfirmationLog::new()];
    let mut prev = g.genesis_digest;
    let mut blocks = Vec::new();
    for h in 1..=len {
        let txs = (0..2)
            .map(|i| {
                let model = Arc::new(init_model(&toy_arch().descriptor(), h * 10 + i).unwrap());
                let fresh = create_transaction(&gen, model, 1, h * 10 + i, 50).unwrap();
                let mut t = fresh.clone();
                for (k, p) in peers.iter().enumerate() {
                    t.append_receipt(create_receipt(p, &fresh, 0.5 + 0.1 * k as f64, h * 10 + i).unwrap());
                }
                t
            })
            .collect();
        let draft = draft_block(&gen, txs, h, prev, g.genesis_digest).unwrap();
        let confs: Vec<Confirmation> = peers
            .iter()
            .zip(logs.iter_mut())
            .map(|(p, log)| confirm_block(p, &draft, log).unwrap())
            .collect();
        let b = finalize_block(&draft, &confs, g.protocol.confirmation_threshold).unwrap();
        prev = b.final_digest.unwrap();
        blocks.push(b);
    }
    (blocks, g)
}

fn flip<const N: usize>(bytes: &[u8; N], rng: &mut impl Rng) -> [u8; N] {
    let mut b = *bytes;
    let i = rng.random_range(0..N);
    b[i] ^= 1 << rng.random_range(0..8);
    b
}

fn flip_digest(d: &mut Digest, rng: &mut impl Rng) {
    *d = Digest::from_bytes(flip(d.as_bytes(), rng));
}

fn flip_address(a: &mut Address, rng: &mut impl Rng) {
    *a = Address::from_bytes(flip(a.as_bytes(), rng));
}

fn flip_key(k: &mut PublicKey, rng: &mut impl Rng) {
    *k = PublicKey::from_bytes(flip(k.as_bytes(), rng));
}

fn flip_sig(s: &mut Signature, rng: &mut impl Rng) {
    *s = Signature::from_bytes(flip(s.as_bytes(), rng));
}

fn bump_weight(t: &mut Transaction, rng: &mut impl Rng) {
    let m: &mut ModelParams = Arc::make_mut(&mut t.ml_model);
    let layers = m.layers_mut_unchecked();
    let l = rng.random_range(0..layers.len());
    let i = rng.random_range(0..layers[l].values.len());
    layers[l].values[i] += 1e-9;
}

pub const MUTATION_KINDS: usize = 24;

/// Changes exactly one field somewhere in the chain and describes it.
pub fn mutate(chain: &mut [Block], kind: usize, rng: &mut impl Rng) -> String {
    let bi = rng.random_range(0..chain.len());
    let b = &mut chain[bi];
    let ti = rng.random_range(0..b.transactions.len());
    let ci = rng.random_range(0..b.confirmations.len());
    let t = &mut b.transactions[ti];
    let ri = rng.random_range(0..t.receipts.len());
    let what = match kind % MUTATION_KINDS {
        0 => {
            b.height += 1;
            "block.height"
        }
        1 => {
            flip_digest(&mut b.prev_final_digest, rng);
            "block.prev_final_digest"
        }
        2 => {
            flip_digest(&mut b.genesis_digest, rng);
            "block.genesis_digest"
        }
        3 => {
            flip_digest(&mut b.draft_digest, rng);
            "block.draft_digest"
        }
        4 => {
            flip_digest(b.final_digest.as_mut().unwrap(), rng);
            "block.final_digest"
        }
        5 => {
            flip_address(&mut t.generator, rng);
            "tx.generator"
        }
        6 => {
            flip_key(&mut t.generator_key, rng);
            "tx.generator_key"
        }
        7 => {
            t.create_time += 1;
            "tx.create_time"
        }
        8 => {
            t.expire_time += 1;
            "tx.expire_time"
        }
        9 => {
            t.ttl += 1;
            "tx.ttl"
        }
        10 => {
            flip_digest(&mut t.digest, rng);
            "tx.digest"
        }
        11 => {
            flip_sig(&mut t.signature, rng);
            "tx.signature"
        }
        12 => {
            bump_weight(t, rng);
            "tx.ml_model"
        }
        13 => {
            flip_address(&mut t.receipts[ri].creator, rng);
            "receipt.creator"
        }
        14 => {
            flip_key(&mut t.receipts[ri].creator_key, rng);
            "receipt.creator_key"
        }
        15 => {
            flip_digest(&mut t.receipts[ri].transaction_digest, rng);
            "receipt.transaction_digest"
        }
        16 => {
            t.receipts[ri].received_at_ttl += 1;
            "receipt.received_at_ttl"
        }
        17 => {
            let a = &mut t.receipts[ri].accuracy;
            *a = if *a > 0.5 { *a - rng.random_range(0.001..0.4) } else { *a + rng.random_range(0.001..0.4) };
            "receipt.accuracy"
        }
        18 => {
            flip_sig(&mut t.receipts[ri].signature, rng);
            "receipt.signature"
        }
        19 => {
            flip_address(&mut b.confirmations[ci].creator, rng);
            "confirmation.creator"
        }
        20 => {
            flip_key(&mut b.confirmations[ci].creator_key, rng);
            "confirmation.creator_key"
        }
        21 => {
            flip_digest(&mut b.confirmations[ci].draft_digest, rng);
            "confirmation.draft_digest"
        }
        22 => {
            let c = &mut b.confirmations[ci];
            let k = rng.random_range(0..c.confirmed_receipt_digests.len());
            flip_digest(&mut c.confirmed_receipt_digests[k], rng);
            "confirmation.confirmed_receipt_digests"
        }
        _ => {
            flip_sig(&mut b.confirmations[ci].signature, rng);
            "confirmation.signature"
        }
    };
    format!("block {} {what}", bi + 1)
}

/// `min(ttl, receipts) - 1` by exhaustive evaluation; `None` when negative.
pub fn received_at_ttl_oracle(ttl: u32, receipts: &[u32]) -> Option<u32> {
    let mut m = ttl as i64;
    for &r in receipts {
        if (r as i64) < m {
            m = r as i64;
        }
    }
    let v = m - 1;
    (v >= 0).then_some(v as u32)
}

/// A transaction with `ttl` and receipts carrying the given
/// `received_at_ttl` values.
pub fn transaction_with_receipts(ttl: u32, values: &[u32]) -> Transaction {
    let gen = generate_identity(Some(7));
    let peer = generate_identity(Some(8));
    let model = Arc::new(ModelParams::zeros(&toy_arch()));
    let mut t = create_transaction(&gen, model, ttl.max(1), 0, 10).unwrap();
    let template = create_receipt(&peer, &t, 0.5, 0).unwrap();
    t.ttl = ttl;
    for &v in values {
        let mut r = template.clone();
        r.received_at_ttl = v;
        t.receipts.push(r);
    }
    t
}
