//! How quickly a non-training observer converges as the FedAvg buffer
//! shrinks (i.e. as it updates more often per round of training).

use dfl::sim::{run_ratio_experiment, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SimConfig { total_ticks: 1500, record_events: false, ..Default::default() };
    let result = run_ratio_experiment(&config, &[32, 8, 2], 0.8)?;
    for run in &result.runs {
        let last = run.artifact.final_frame().map(|f| f.accuracy[result.observer]).unwrap_or_default();
        match run.ticks_to_target {
            Some(t) => println!("buffer {:2}: 0.8 reached at tick {t}, final {last:.3}", run.buffer_size),
            None => println!("buffer {:2}: 0.8 not reached, final {last:.3}", run.buffer_size),
        }
    }
    Ok(())
}
