use std::collections::VecDeque;

use super::*;
use crate::crypto::generate_identity;
use crate::data::NodeBehavior;
use crate::ledger::{verify_chain, GenesisBlock, Hyperparameters, ProtocolParams};
use crate::model::{init_model, Architecture, LabeledSample, ModelParams};
use crate::rng::derive_rng;

fn arch() -> Architecture {
    Architecture::mlp(4, 3, 2)
}

fn genesis(batch: u32, buffer: u32, per_block: u32) -> GenesisBlock {
    GenesisBlock::new(
        arch().descriptor(),
        Hyperparameters {
            learning_rate: 0.1,
            train_batch_size: batch,
            test_batch_size: 4,
        },
        ProtocolParams {
            transactions_per_block: per_block,
            fedavg_buffer_size: buffer,
            ..Default::default()
        },
    )
}

fn samples(n: usize) -> Vec<LabeledSample> {
    (0..n)
        .map(|i| {
            let label = i % 2;
            let x = if label == 0 { 1.0 } else { -1.0 };
            LabeledSample::new(vec![x, x, 0.5 * x, 0.0], label)
        })
        .collect()
}

fn node(seed: u64, g: &GenesisBlock, behavior: NodeBehavior, policy: &str) -> Node {
    let mut cfg = NodeConfig::new(g.clone());
    cfg.behavior = behavior;
    cfg.policy = policy.to_string();
    Node::new(
        generate_identity(Some(seed)),
        cfg,
        init_model(&arch().descriptor(), 1).unwrap(),
        samples(8),
        derive_rng(seed, &[3]),
    )
    .unwrap()
}

/// Fully connected honest nodes.
fn mesh(n: u64, g: &GenesisBlock) -> Vec<Node> {
    let mut nodes: Vec<Node> = (0..n)
        .map(|s| node(s + 10, g, NodeBehavior::Honest, "half_fedavg"))
        .collect();
    let addrs: Vec<_> = nodes.iter().map(|n| *n.address()).collect();
    for node in &mut nodes {
        for a in &addrs {
            node.add_peer(*a);
        }
    }
    nodes
}

/// Delivers messages FIFO between fully connected nodes until quiet.
fn pump(nodes: &mut [Node], from: usize, out: Vec<Outgoing>, now: u64) -> usize {
    let mut queue: VecDeque<(usize, Outgoing)> = out.into_iter().map(|o| (from, o)).collect();
    let mut delivered = 0;
    while let Some((src, o)) = queue.pop_front() {
        let targets: Vec<usize> = match o.target {
            Target::AllPeers => (0..nodes.len()).filter(|&i| i != src).collect(),
            Target::Peer(a) => nodes
                .iter()
                .position(|n| *n.address() == a)
                .into_iter()
                .collect(),
        };
        for t in targets {
            delivered += 1;
            let replies = nodes[t].on_message(o.message.clone(), now);
            queue.extend(replies.into_iter().map(|r| (t, r)));
        }
    }
    delivered
}

#[test]
fn training_waits_for_a_full_batch() {
    let g = genesis(64, 4, 4);
    let mut n = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    assert!(n.on_data(samples(63), 0).is_empty());
    let out = n.on_data(samples(1), 0);
    assert_eq!(out.len(), 1);
    assert!(matches!(out[0].message, Message::Transaction(_)));
    assert_eq!(out[0].target, Target::AllPeers);
    assert_eq!(n.queued_samples(), 0);
}

#[test]
fn observer_never_broadcasts() {
    let g = genesis(64, 4, 4);
    let mut n = node(1, &g, NodeBehavior::Observer, "half_fedavg");
    for _ in 0..10 {
        assert!(n.on_data(samples(64), 0).is_empty());
    }
    assert_eq!(n.stats().trainings, 0);
}

#[test]
fn fresh_transaction_is_receipted_and_returned_to_generator() {
    let g = genesis(4, 4, 4);
    let mut a = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let mut b = node(2, &g, NodeBehavior::Honest, "half_fedavg");
    let out = a.on_data(samples(4), 0);
    let reply = b.on_message(out[0].message.clone(), 0);
    assert_eq!(reply.len(), 1);
    assert_eq!(reply[0].target, Target::Peer(*a.address()));
    let Message::ReceiptedTransaction(t) = &reply[0].message else {
        panic!("expected receipted transaction");
    };
    assert_eq!(t.receipts.len(), 1);
    assert_eq!(t.receipts[0].received_at_ttl, 0);
    assert_eq!(b.buffered(), 1);

    // Second delivery of the same digest changes nothing.
    assert!(b.on_message(out[0].message.clone(), 0).is_empty());
    assert_eq!(b.buffered(), 1);
    assert_eq!(b.stats().receipts_issued, 1);

    // The generator merges the receipt into its pending transaction.
    a.on_message(reply[0].message.clone(), 0);
    assert_eq!(a.pending_transactions()[0].receipts.len(), 1);
}

#[test]
fn exhausted_copy_does_not_block_the_fresh_one() {
    let g = genesis(4, 4, 4);
    let mut a = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let mut b = node(2, &g, NodeBehavior::Honest, "half_fedavg");
    let mut c = node(3, &g, NodeBehavior::Honest, "half_fedavg");
    let fresh = a.on_data(samples(4), 0).remove(0).message;
    let receipted = b.on_message(fresh.clone(), 0).remove(0).message;
    assert!(c.on_message(receipted, 0).is_empty());
    assert_eq!(c.stats().receipts_issued, 0);
    assert_eq!(c.on_message(fresh, 0).len(), 1);
    assert_eq!(c.stats().receipts_issued, 1);
}

#[test]
fn larger_ttl_floods_onward() {
    let mut g = genesis(4, 4, 4);
    g.protocol.initial_ttl = 2;
    let g = GenesisBlock::new(g.model_architecture.clone(), g.hyperparameters, g.protocol);
    let mut a = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let mut b = node(2, &g, NodeBehavior::Honest, "half_fedavg");
    let mut c = node(3, &g, NodeBehavior::Honest, "half_fedavg");
    let fresh = a.on_data(samples(4), 0).remove(0).message;
    let hop = b.on_message(fresh, 0).remove(0);
    assert_eq!(hop.target, Target::AllPeers);
    let back = c.on_message(hop.message, 0).remove(0);
    assert_eq!(back.target, Target::Peer(*a.address()));
    let Message::ReceiptedTransaction(t) = back.message else {
        panic!()
    };
    assert_eq!(
        t.receipts.iter().map(|r| r.received_at_ttl).collect::<Vec<_>>(),
        vec![1, 0]
    );
}

#[test]
fn expired_transaction_is_dropped() {
    let g = genesis(4, 4, 4);
    let mut a = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let mut b = node(2, &g, NodeBehavior::Honest, "half_fedavg");
    let out = a.on_data(samples(4), 0);
    let late = g.protocol.transaction_lifetime + 1;
    assert!(b.on_message(out[0].message.clone(), late).is_empty());
    assert_eq!(b.buffered(), 0);
    assert!(matches!(
        b.take_events().last(),
        Some(NodeEvent::Dropped { cause, .. }) if cause == "expired"
    ));
}

#[test]
fn tampered_transaction_is_dropped() {
    let g = genesis(4, 4, 4);
    let mut a = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let mut b = node(2, &g, NodeBehavior::Honest, "half_fedavg");
    let Message::Transaction(mut t) = a.on_data(samples(4), 0).remove(0).message else {
        panic!()
    };
    t.ttl = 5;
    assert!(b.on_message(Message::Transaction(t), 0).is_empty());
    assert_eq!(b.stats().messages_dropped, 1);
}

#[test]
fn full_buffer_of_current_model_is_a_fixed_point() {
    let g = genesis(4, 2, 4);
    let mut n = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    let before = n.model().clone();
    for seed in [5, 6] {
        let id = generate_identity(Some(seed));
        let t = crate::ledger::create_transaction(&id, std::sync::Arc::new(before.clone()), 1, 0, 10)
            .unwrap();
        n.on_message(Message::Transaction(t), 0);
    }
    assert_eq!(n.stats().updates, 1);
    assert_eq!(n.buffered(), 0);
    for (x, y) in n.model().weights().zip(before.weights()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn zero_reputation_sender_has_no_influence() {
    let g = genesis(4, 2, 4);
    let honest = generate_identity(Some(5));
    let bad = generate_identity(Some(6));
    let mut trained = init_model(&arch().descriptor(), 7).unwrap();
    for _ in 0..50 {
        trained = crate::model::train_step(&trained, &samples(8), 0.5).unwrap();
    }
    assert_eq!(crate::model::evaluate(&trained, &samples(8)).unwrap(), 1.0);
    let good_model = std::sync::Arc::new(trained);
    let run = |bad_model: ModelParams| {
        let mut n = node(1, &g, NodeBehavior::Honest, "reputation_0.05");
        let mut t = 0;
        // Twenty rounds in which the bad sender is always the least accurate.
        for _ in 0..21 {
            for (id, m) in [(&honest, good_model.clone()), (&bad, std::sync::Arc::new(bad_model.clone()))] {
                let tx = crate::ledger::create_transaction(id, m, 1, t, 1000).unwrap();
                n.on_message(Message::Transaction(tx), t);
            }
            t += 1;
        }
        n
    };
    let zeros = ModelParams::zeros(&arch());
    let a = run(zeros.clone());
    assert_eq!(a.reputation().get(bad.address()), 0.0);
    assert_eq!(a.stats().reputation_zero_round.get(bad.address()), Some(&20));
    // Once the sender sits at zero, replacing its model changes nothing in
    // the next round; compare a run whose last round swaps the bad model.
    let mut b = run(zeros.clone());
    let mut c = run(zeros);
    for (n, m) in [(&mut b, zeros_plus(&arch(), 0.0)), (&mut c, zeros_plus(&arch(), 0.0009))] {
        for (id, model) in [(&honest, good_model.clone()), (&bad, std::sync::Arc::new(m))] {
            let tx = crate::ledger::create_transaction(id, model, 1, 100, 1000).unwrap();
            n.on_message(Message::Transaction(tx), 100);
        }
    }
    assert_eq!(b.model(), c.model());
}

fn zeros_plus(arch: &Architecture, v: f64) -> ModelParams {
    ModelParams::zeros(arch).map_weights(|_, _, _| v).unwrap()
}

#[test]
fn model_poisoner_keeps_its_trained_model_but_shares_noise() {
    let g = genesis(4, 4, 4);
    let mut n = node(1, &g, NodeBehavior::ModelPoisoner, "half_fedavg");
    let out = n.on_data(samples(4), 0);
    let Message::Transaction(t) = &out[0].message else {
        panic!()
    };
    assert!(t.ml_model.weights().all(|w| (0.0..=0.001).contains(&w)));
    assert_ne!(&*t.ml_model, n.model());
}

#[test]
fn two_node_blocks_carry_four_transactions_and_four_confirmations() {
    let g = genesis(4, 4, 4);
    let mut nodes = mesh(2, &g);
    for tick in 0..40u64 {
        for i in 0..2 {
            let out = nodes[i].on_data(samples(4), tick);
            pump(&mut nodes, i, out, tick);
            let out = nodes[i].on_tick(tick);
            pump(&mut nodes, i, out, tick);
        }
    }
    for n in &nodes {
        assert_eq!(n.chain().len(), 10);
        verify_chain(n.chain(), &g).unwrap();
        for b in n.chain() {
            assert_eq!(b.transactions.len(), 4);
            assert_eq!(b.confirmed_receipt_count(), 4);
            assert_eq!(b.confirmations.len(), 1);
        }
        assert_eq!(n.stats().updates, 10);
    }
}

#[test]
fn four_nodes_twelve_per_block_confirm_thirty_six() {
    let g = genesis(4, 4, 12);
    let mut nodes = mesh(4, &g);
    for tick in 0..12u64 {
        for i in 0..4 {
            let out = nodes[i].on_data(samples(4), tick);
            pump(&mut nodes, i, out, tick);
        }
    }
    for n in &nodes {
        assert_eq!(n.chain().len(), 1);
        assert_eq!(n.chain()[0].confirmed_receipt_count(), 36);
    }
}

#[test]
fn draft_confirmation_rules() {
    let g = genesis(4, 8, 4);
    let mut nodes = mesh(2, &g);
    let mut stranger = node(99, &g, NodeBehavior::Honest, "half_fedavg");
    let mut draft = None;
    for tick in 0..4 {
        let out = nodes[0].on_data(samples(4), tick);
        let reply = nodes[1].on_message(out[0].message.clone(), tick);
        let more = nodes[0].on_message(reply[0].message.clone(), tick);
        if let Some(o) = more.into_iter().find(|o| matches!(o.message, Message::DraftBlock(_))) {
            draft = Some(o.message);
        }
    }
    let draft = draft.expect("draft after four receipted transactions");
    let conf = nodes[1].on_message(draft.clone(), 4);
    let Message::Confirmation(c) = &conf[0].message else {
        panic!()
    };
    assert_eq!(c.confirmed_receipt_digests.len(), 4);
    assert_eq!(conf[0].target, Target::Peer(*nodes[0].address()));
    // A retried draft gets the same confirmation back.
    assert_eq!(nodes[1].on_message(draft.clone(), 5), conf);
    assert!(stranger.on_message(draft, 4).is_empty());

    assert!(nodes[0].on_message(conf[0].message.clone(), 4).is_empty());
    assert_eq!(nodes[0].chain().len(), 1);
    // Duplicate after finalization is ignored.
    assert!(nodes[0].on_message(conf[0].message.clone(), 4).is_empty());
    assert_eq!(nodes[0].chain().len(), 1);
}

#[test]
fn lost_confirmations_trigger_retry_then_abandon() {
    let g = genesis(4, 8, 1);
    let mut nodes = mesh(2, &g);
    let out = nodes[0].on_data(samples(4), 0);
    let reply = nodes[1].on_message(out[0].message.clone(), 0);
    let draft = nodes[0].on_message(reply[0].message.clone(), 0);
    assert!(matches!(draft[0].message, Message::DraftBlock(_)));
    assert!(nodes[0].on_tick(1).is_empty());
    let retry = nodes[0].on_tick(5);
    assert!(matches!(retry[0].message, Message::DraftBlock(_)));
    assert!(nodes[0].on_tick(10).is_empty());
    assert_eq!(nodes[0].stats().drafts_abandoned, 1);
    assert!(nodes[0].chain().is_empty());
}

#[test]
fn isolated_node_still_trains_and_extends_its_chain() {
    let g = genesis(4, 4, 2);
    let mut n = node(1, &g, NodeBehavior::Honest, "half_fedavg");
    for t in 0..9 {
        let out = n.on_data(samples(4), t);
        assert!(!out.is_empty());
    }
    assert_eq!(n.stats().trainings, 9);
    assert_eq!(n.chain().len(), 4);
    verify_chain(n.chain(), &g).unwrap();
}

#[test]
fn ledger_off_builds_no_blocks() {
    let g = genesis(4, 4, 1);
    let mut nodes = mesh(2, &g);
    for n in &mut nodes {
        n.config_mut_for_tests().ledger = false;
    }
    for tick in 0..8 {
        let out = nodes[0].on_data(samples(4), tick);
        pump(&mut nodes, 0, out, tick);
    }
    assert!(nodes[0].chain().is_empty());
    assert_eq!(nodes[1].stats().receipts_issued, 8);
}

#[test]
fn message_round_trip() {
    use crate::codec::{Decode, Encode};
    let g = genesis(4, 8, 1);
    let mut nodes = mesh(2, &g);
    let tx = nodes[0].on_data(samples(4), 0).remove(0).message;
    let receipted = nodes[1].on_message(tx.clone(), 0).remove(0).message;
    let draft = nodes[0].on_message(receipted.clone(), 0).remove(0).message;
    let conf = nodes[1].on_message(draft.clone(), 0).remove(0).message;
    for m in [tx, receipted, draft, conf] {
        let bytes = m.to_canonical_bytes();
        assert_eq!(Message::from_canonical_bytes(&bytes).unwrap(), m);
    }
    assert!(Message::from_canonical_bytes(&[0x09, 0, 0, 0, 0]).is_err());
}

