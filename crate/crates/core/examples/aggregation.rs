//! HalfFedAvg versus Reputation-0.05 when one of four buffered models is
//! poisoned every round. Honest peers train on top of the current model.

use std::sync::Arc;

use dfl::crypto::generate_identity;
use dfl::data::{poison_model, synthetic_split, SyntheticConfig};
use dfl::model::{
    evaluate, half_fedavg, init_model, train_step, weighted_fedavg, Architecture, BufferEntry, FedAvgBuffer,
    ModelParams,
};
use dfl::reputation::{update_reputation_0_05, ReputationTable};
use dfl::rng::derive_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, test) = synthetic_split(&SyntheticConfig::default())?;
    let arch = Architecture::mlp(train.feature_dim(), 32, train.classes());
    let honest: Vec<_> = (0..3).map(|i| *generate_identity(Some(i)).address()).collect();
    let attacker = *generate_identity(Some(99)).address();
    let mut rng = derive_rng(1, &[]);

    let start = init_model(&arch.descriptor(), 0)?;
    let (mut plain, mut guarded) = (start.clone(), start);
    let mut reputation = ReputationTable::new();
    let batches: Vec<_> = train.samples().chunks(64).collect();

    let mut fill = |current: &ModelParams, round: usize| -> Result<FedAvgBuffer, Box<dyn std::error::Error>> {
        let mut buffer = FedAvgBuffer::new(4);
        for (i, addr) in honest.iter().enumerate() {
            let model = train_step(current, batches[(round * 3 + i) % batches.len()], 0.05)?;
            let accuracy = evaluate(&model, test.samples())?;
            buffer.insert(BufferEntry { generator: *addr, model: Arc::new(model), accuracy, create_time: 0 })?;
        }
        let poisoned = poison_model(&arch, &mut rng);
        let accuracy = evaluate(&poisoned, test.samples())?;
        buffer.insert(BufferEntry { generator: attacker, model: Arc::new(poisoned), accuracy, create_time: 0 })?;
        Ok(buffer)
    };

    for round in 1..=60 {
        plain = half_fedavg(&fill(&plain, round)?, &plain)?;
        let buffer = fill(&guarded, round)?;
        reputation = update_reputation_0_05(&reputation, &buffer.observations());
        guarded = weighted_fedavg(&buffer, &reputation, &guarded)?;
        if round % 10 == 0 {
            println!(
                "round {round:2}: half FedAvg {:.3} | Reputation-0.05 {:.3} (attacker reputation {:.2})",
                evaluate(&plain, test.samples())?,
                evaluate(&guarded, test.samples())?,
                reputation.get(&attacker)
            );
        }
    }
    Ok(())
}
