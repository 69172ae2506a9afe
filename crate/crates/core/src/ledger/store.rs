//! On-disk chain format: the magic bytes `DFL1`, then each block in height
//! order as a `u32` big-endian length followed by its canonical encoding.
//!
//! A chain directory holds `chain.dfl` and the `genesis.json` it was built
//! against.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Block, GenesisBlock};
use crate::codec::{Decode, DecodeError, Encode, Reader, Writer};

pub const MAGIC: &[u8; 4] = b"DFL1";
pub const CHAIN_FILE: &str = "chain.dfl";
pub const GENESIS_FILE: &str = "genesis.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("not a chain file (bad magic)")]
    BadMagic,
    #[error("corrupt chain file: {0}")]
    Decode(#[from] DecodeError),
    #[error("invalid genesis file: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn encode_chain(blocks: &[Block]) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(MAGIC);
    for b in blocks {
        w.bytes(&b.to_canonical_bytes());
    }
    w.into_bytes()
}

pub fn decode_chain(bytes: &[u8]) -> Result<Vec<Block>, StoreError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut r = Reader::new(&bytes[4..]);
    let mut blocks = Vec::new();
    while r.remaining() > 0 {
        blocks.push(Block::from_canonical_bytes(r.bytes()?)?);
    }
    Ok(blocks)
}

/// Resolves either a chain directory or a direct path to `chain.dfl`.
pub fn chain_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(CHAIN_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn write_chain_dir(dir: &Path, blocks: &[Block], genesis: &GenesisBlock) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let chain = dir.join(CHAIN_FILE);
    fs::write(&chain, encode_chain(blocks)).map_err(io_err(&chain))?;
    let g = dir.join(GENESIS_FILE);
    fs::write(&g, serde_json::to_vec_pretty(genesis)?).map_err(io_err(&g))?;
    Ok(())
}

pub fn read_chain(path: &Path) -> Result<Vec<Block>, StoreError> {
    let p = chain_path(path);
    let bytes = fs::read(&p).map_err(io_err(&p))?;
    decode_chain(&bytes)
}

pub fn read_genesis(dir: &Path) -> Result<GenesisBlock, StoreError> {
    let p = if dir.is_dir() {
        dir.join(GENESIS_FILE)
    } else {
        dir.with_file_name(GENESIS_FILE)
    };
    let bytes = fs::read(&p).map_err(io_err(&p))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Human-readable export of a chain.
pub fn chain_to_json(blocks: &[Block]) -> serde_json::Result<String> {
    serde_json::to_string_pretty(blocks)
}
