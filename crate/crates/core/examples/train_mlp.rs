//! Train the default MLP on the synthetic dataset with plain SGD.

use dfl::data::{synthetic_split, SyntheticConfig};
use dfl::model::{evaluate, init_model, loss, train_step, Architecture};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, test) = synthetic_split(&SyntheticConfig::default())?;
    let arch = Architecture::mlp(train.feature_dim(), 32, train.classes());
    let mut model = init_model(&arch.descriptor(), 0)?;
    println!("{} parameters, initial accuracy {:.3}", arch.parameter_count(), evaluate(&model, test.samples())?);
    for epoch in 1..=3 {
        for batch in train.samples().chunks(64) {
            model = train_step(&model, batch, 0.05)?;
        }
        println!(
            "epoch {epoch}: train loss {:.4}, test accuracy {:.3}",
            loss(&model, train.samples())?,
            evaluate(&model, test.samples())?
        );
    }
    Ok(())
}
