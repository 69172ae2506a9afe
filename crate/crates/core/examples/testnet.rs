//! Two real nodes over loopback TCP until each has five blocks; prints
//! chain statistics and where the time went.

use std::thread::sleep;
use std::time::Duration;

use dfl::net::{spawn_node, NodeRunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = NodeRunConfig { node_count: 2, samples_per_second: 640.0, confirmation_timeout: 2, ..Default::default() };
    let a = spawn_node(NodeRunConfig { wait_for_peers: Some(1), ..base.clone() })?;
    let b = spawn_node(NodeRunConfig { node_index: 1, peers: vec![a.local_addr().to_string()], ..base })?;
    println!("A {} on {}\nB {} on {}", a.address(), a.local_addr(), b.address(), b.local_addr());
    while a.blocks() < 5 || b.blocks() < 5 {
        sleep(Duration::from_millis(100));
    }
    for (name, node) in [("A", a), ("B", b)] {
        let report = node.stop()?;
        println!("{name}: {}", serde_json::to_string(&report.chain_stats)?);
        println!("{name}: blockchain overhead {:.1}%", report.profile.blockchain_overhead_fraction * 100.0);
    }
    Ok(())
}
