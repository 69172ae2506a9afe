//! Per-node class mixes for the IID, two-label and Dirichlet partitions,
//! and what a dataset poisoner feeds its trainer.

use dfl::data::{draw_training_batch, make_partition, poison_dataset_batch, synthetic_split, PartitionKind, SyntheticConfig};
use dfl::rng::derive_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, _) = synthetic_split(&SyntheticConfig::default())?;
    for kind in [PartitionKind::Iid, PartitionKind::TwoLabels, PartitionKind::Dirichlet { alpha: 0.5 }] {
        let spec = make_partition(kind, 4, train.classes(), 0)?;
        println!("{kind:?}");
        for node in 0..4 {
            let row: Vec<String> = spec.row(node)?.iter().map(|p| format!("{p:.2}")).collect();
            let mut counts = vec![0; train.classes()];
            let mut rng = derive_rng(0, &[node as u64]);
            for s in draw_training_batch(&spec, node, &train, 500, &mut rng)? {
                counts[s.label] += 1;
            }
            println!("  node {node}: p = [{}]\n          drawn {counts:?}", row.join(" "));
        }
    }
    let noise = poison_dataset_batch(train.feature_dim(), 2, train.classes(), &mut derive_rng(3, &[]));
    println!("poisoned samples: {:?}", noise.iter().map(|s| s.label).collect::<Vec<_>>());
    Ok(())
}
