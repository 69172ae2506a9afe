//! Seed derivation. Every random stream in a run is derived from the master
//! seed plus a tag path, so streams are independent and reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crypto::hash;

pub type StreamRng = ChaCha8Rng;

pub mod stream {
    pub const DATA: u64 = 1;
    pub const SCHEDULE: u64 = 2;
    pub const ATTACK: u64 = 3;
    pub const TOPOLOGY: u64 = 4;
    pub const PARTITION: u64 = 5;
    pub const IDENTITY: u64 = 6;
    pub const MODEL_INIT: u64 = 7;
    pub const TEST_SLICE: u64 = 8;
    pub const LOSS: u64 = 9;
    pub const REPETITION: u64 = 10;
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut buf = Vec::with_capacity(8 * (tags.len() + 1));
    buf.extend_from_slice(&master.to_be_bytes());
    for t in tags {
        buf.extend_from_slice(&t.to_be_bytes());
    }
    let d = hash(&buf);
    u64::from_be_bytes(d.as_bytes()[..8].try_into().expect("8 bytes"))
}

pub fn derive_rng(master: u64, tags: &[u64]) -> StreamRng {
    let mut buf = Vec::with_capacity(8 * (tags.len() + 1));
    buf.extend_from_slice(&master.to_be_bytes());
    for t in tags {
        buf.extend_from_slice(&t.to_be_bytes());
    }
    StreamRng::from_seed(*hash(&buf).as_bytes())
}
