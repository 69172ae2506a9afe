//! Random connected topologies: every node dials `active` others.

use dfl::sim::{generate_topology, is_connected};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (nodes, active) in [(5, 1), (10, 2), (20, 3)] {
        let adjacency = generate_topology(nodes, active, 0)?;
        let degrees: Vec<usize> = adjacency.iter().map(Vec::len).collect();
        println!("{nodes} nodes, {active} active: connected {}, degrees {degrees:?}", is_connected(&adjacency));
    }
    Ok(())
}
