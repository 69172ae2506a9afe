//! A ten-node simulation with one model poisoner, under either policy.
//!
//!     cargo run --release --example simulation -- reputation_0.05 [out-dir]

use dfl::data::NodeBehavior;
use dfl::sim::{run_simulation, write_run_dir, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let policy = args.next().unwrap_or_else(|| "reputation_0.05".into());
    let config = SimConfig {
        policy,
        total_ticks: 1500,
        behaviors: [(0, NodeBehavior::ModelPoisoner)].into(),
        ..Default::default()
    };
    let run = run_simulation(&config)?;
    for frame in run.frames.iter().step_by(30) {
        let acc: Vec<String> = frame.accuracy.iter().map(|a| format!("{a:.2}")).collect();
        println!("tick {:5}: {}", frame.tick, acc.join(" "));
    }
    let poisoner = run.addresses[0];
    for &n in &run.topology[0] {
        match run.stats[n].reputation_zero_round.get(&poisoner) {
            Some(r) => println!("node {n} zeroed the poisoner's reputation at update round {r}"),
            None => println!("node {n} still trusts the poisoner"),
        }
    }
    if let Some(dir) = args.next() {
        write_run_dir(&run, dir.as_ref())?;
        println!("artifacts written to {dir}");
    }
    Ok(())
}
