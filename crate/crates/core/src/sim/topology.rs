use std::collections::{BTreeSet, VecDeque};

use rand::seq::index::sample;

use super::SimError;
use crate::rng::derive_rng;

/// Undirected adjacency lists, sorted, no self loops.
pub type Adjacency = Vec<Vec<usize>>;

const MAX_ATTEMPTS: usize = 10_000;

/// Each node opens `active` connections to distinct, uniformly chosen other
/// nodes; edges are undirected. Disconnected draws are rejected and redrawn.
pub fn generate_topology(node_count: usize, active: usize, seed: u64) -> Result<Adjacency, SimError> {
    if node_count < 2 {
        return Err(SimError::Config(format!(
            "a topology needs at least 2 nodes, got {node_count}"
        )));
    }
    if active == 0 || active >= node_count {
        return Err(SimError::Config(format!(
            "active connections must be in 1..{node_count}, got {active}"
        )));
    }
    let mut rng = derive_rng(seed, &[crate::rng::stream::TOPOLOGY]);
    for _ in 0..MAX_ATTEMPTS {
        let mut sets = vec![BTreeSet::new(); node_count];
        for i in 0..node_count {
            // Choose among the other n-1 nodes by skipping over `i`.
            for j in sample(&mut rng, node_count - 1, active) {
                let j = if j >= i { j + 1 } else { j };
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        let adjacency: Adjacency = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        if is_connected(&adjacency) {
            return Ok(adjacency);
        }
    }
    Err(SimError::Config(format!(
        "no connected topology found for {node_count} nodes with {active} active connections"
    )))
}

pub fn full_topology(node_count: usize) -> Adjacency {
    (0..node_count)
        .map(|i| (0..node_count).filter(|&j| j != i).collect())
        .collect()
}

pub fn is_connected(adjacency: &Adjacency) -> bool {
    if adjacency.is_empty() {
        return true;
    }
    let mut seen = vec![false; adjacency.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adjacency[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

pub fn validate_topology(adjacency: &Adjacency, node_count: usize) -> Result<(), SimError> {
    if adjacency.len() != node_count {
        return Err(SimError::Config(format!(
            "topology lists {} nodes, config has {node_count}",
            adjacency.len()
        )));
    }
    for (i, peers) in adjacency.iter().enumerate() {
        if peers.is_empty() {
            return Err(SimError::Config(format!("node {i} has no peers")));
        }
        for &j in peers {
            if j >= node_count || j == i {
                return Err(SimError::Config(format!("node {i} lists invalid peer {j}")));
            }
            if !adjacency[j].contains(&i) {
                return Err(SimError::Config(format!(
                    "edge {i}-{j} is not symmetric"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_nodes_two_active_over_many_seeds() {
        for seed in 0..100 {
            let t = generate_topology(10, 2, seed).unwrap();
            validate_topology(&t, 10).unwrap();
            assert!(is_connected(&t));
            assert!(t.iter().all(|p| (2..=9).contains(&p.len())), "{t:?}");
        }
    }

    #[test]
    fn two_nodes_one_edge_and_determinism() {
        assert_eq!(generate_topology(2, 1, 3).unwrap(), vec![vec![1], vec![0]]);
        assert_eq!(generate_topology(10, 2, 5).unwrap(), generate_topology(10, 2, 5).unwrap());
    }

    #[test]
    fn impossible_parameters() {
        assert!(generate_topology(1, 0, 0).is_err());
        assert!(generate_topology(5, 5, 0).is_err());
        assert!(generate_topology(5, 0, 0).is_err());
    }

    #[test]
    fn validation_catches_asymmetry() {
        assert!(validate_topology(&vec![vec![1], vec![]], 2).is_err());
        assert!(validate_topology(&vec![vec![1], vec![2]], 2).is_err());
        validate_topology(&full_topology(4), 4).unwrap();
        assert!(!is_connected(&vec![vec![1], vec![0], vec![3], vec![2]]));
    }
}
