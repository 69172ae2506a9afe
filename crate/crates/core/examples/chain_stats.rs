//! Statistics of a stored chain directory, e.g. one written by `dfl node run`
//! or `dfl sim run` (under `chains/node-<i>`).
//!
//!     cargo run --example chain_stats -- sim-out/chains/node-0

use dfl::ledger::{store::read_chain, store::read_genesis, verify_chain};
use dfl::net::export_stats;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).ok_or("usage: chain_stats <chain-dir>")?;
    let dir = std::path::Path::new(&dir);
    let blocks = read_chain(dir)?;
    let genesis = read_genesis(dir)?;
    verify_chain(&blocks, &genesis)?;
    println!("{}", serde_json::to_string_pretty(&export_stats(&blocks)?)?);
    Ok(())
}
