//! Build, confirm and verify a one-block chain, then tamper with it.

use std::sync::Arc;

use dfl::crypto::generate_identity;
use dfl::ledger::{
    compute_received_at_ttl, confirm_block, create_receipt, create_transaction, draft_block, finalize_block,
    verify_chain, ConfirmationLog, GenesisBlock, Hyperparameters, ProtocolParams,
};
use dfl::model::{init_model, Architecture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arch = Architecture::mlp(4, 8, 3);
    let genesis = GenesisBlock::new(arch.descriptor(), Hyperparameters::default(), ProtocolParams::default());
    let generator = generate_identity(Some(1));
    let peer = generate_identity(Some(2));
    println!("generator {}\npeer      {}", generator.address(), peer.address());

    let model = Arc::new(init_model(&arch.descriptor(), 7)?);
    let fresh = create_transaction(&generator, model, 2, 0, 100)?;
    println!("next hop budget of a fresh ttl-2 transaction: {}", compute_received_at_ttl(&fresh)?);

    let mut tx = fresh.clone();
    tx.append_receipt(create_receipt(&peer, &fresh, 0.42, 1)?);
    tx.verify_with_receipts()?;

    let draft = draft_block(&generator, vec![tx], 1, genesis.genesis_digest, genesis.genesis_digest)?;
    let confirmation = confirm_block(&peer, &draft, &mut ConfirmationLog::new())?;
    let block = finalize_block(&draft, &[confirmation], genesis.protocol.confirmation_threshold)?;
    let mut chain = vec![block];
    verify_chain(&chain, &genesis)?;
    println!("chain of {} block(s) verifies", chain.len());

    chain[0].transactions[0].receipts[0].accuracy = 0.99;
    match verify_chain(&chain, &genesis) {
        Ok(()) => println!("tampering went unnoticed?!"),
        Err(fault) => println!("tampered chain rejected: {fault}"),
    }
    Ok(())
}
