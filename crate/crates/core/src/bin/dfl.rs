use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dfl::ledger::store::{chain_to_json, read_chain};
use dfl::net::{export_stats, run_node, NodeRunConfig};
use dfl::sim::{generate_topology, run_ratio_experiment, run_repetitions, write_metrics_csv, write_run_dir, SimConfig};

/// Decentralized federated learning: node, simulator and topology tools.
/// Log level comes from DFL_LOG (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "dfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deployed p2p node.
    #[command(subcommand)]
    Node(NodeCmd),
    /// Tick-based simulator.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Topology tools.
    #[command(subcommand)]
    Topo(TopoCmd),
}

#[derive(Subcommand)]
enum NodeCmd {
    /// Run a node until `run_seconds` / `stop_after_blocks` is reached.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Blockchain statistics of a chain directory or chain file, as JSON.
    ExportStats {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Dump a chain as JSON.
    ExportJson {
        #[arg(long)]
        chain: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimCmd {
    /// Run a simulation (all repetitions) and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "sim-out")]
        out: PathBuf,
    },
    /// Observer accuracy under several FedAvg buffer sizes.
    Ratio {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "32,8,2")]
        buffers: Vec<u32>,
        #[arg(long, default_value_t = 0.8)]
        target: f64,
        #[arg(long, default_value = "ratio-out")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TopoCmd {
    /// Random connected topology as a JSON adjacency list.
    Gen {
        #[arg(long)]
        nodes: usize,
        #[arg(long)]
        active: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Node(NodeCmd::Run { config }) => {
            let config = NodeRunConfig::from_json(&read(&config)?)?;
            let report = run_node(config)?;
            println!("{}", serde_json::to_string_pretty(&report.profile)?);
            if let Some(s) = report.chain_stats {
                println!("{}", serde_json::to_string_pretty(&s)?);
            }
        }
        Command::Node(NodeCmd::ExportStats { chain }) => {
            let blocks = read_chain(&chain)?;
            println!("{}", serde_json::to_string_pretty(&export_stats(&blocks)?)?);
        }
        Command::Node(NodeCmd::ExportJson { chain }) => {
            println!("{}", chain_to_json(&read_chain(&chain)?)?);
        }
        Command::Sim(SimCmd::Run { config, out }) => {
            let config = SimConfig::from_json(&read(&config)?)?;
            let result = run_repetitions(&config)?;
            if result.runs.len() == 1 {
                write_run_dir(&result.runs[0], &out)?;
            } else {
                for (r, run) in result.runs.iter().enumerate() {
                    write_run_dir(run, &out.join(format!("rep-{r}")))?;
                }
                let csv = write_metrics_csv(&result.mean, &result.runs[0].layer_names);
                fs::write(out.join("mean-metrics.csv"), csv)?;
            }
            for (r, run) in result.runs.iter().enumerate() {
                if let Some(f) = run.final_frame() {
                    println!("run {r}: tick {} accuracy {:?}", f.tick, f.accuracy);
                }
            }
        }
        Command::Sim(SimCmd::Ratio { config, buffers, target, out }) => {
            let config = SimConfig::from_json(&read(&config)?)?;
            let result = run_ratio_experiment(&config, &buffers, target)?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("observer.csv"), result.observer_csv())?;
            for run in &result.runs {
                write_run_dir(&run.artifact, &out.join(format!("buffer-{}", run.buffer_size)))?;
                match run.ticks_to_target {
                    Some(t) => println!("buffer {}: observer reached {target} at tick {t}", run.buffer_size),
                    None => println!("buffer {}: observer never reached {target}", run.buffer_size),
                }
            }
        }
        Command::Topo(TopoCmd::Gen { nodes, active, seed }) => {
            println!("{}", serde_json::to_string(&generate_topology(nodes, active, seed)?)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DFL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
