use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use super::config::{DatasetSpec, SimConfig, TopologySpec};
use super::metrics::{collect_metrics, mean_series, write_metrics_csv, MetricsFrame};
use super::topology::Adjacency;
use super::SimError;
use crate::crypto::{generate_identity, Address};
use crate::data::{
    draw_training_batch, make_partition, mnist::load_mnist, poison_dataset_batch, synthetic_split,
    Dataset, NodeBehavior, PartitionSpec,
};
use crate::ledger::store::write_chain_dir;
use crate::ledger::{Block, GenesisBlock};
use crate::model::{init_model, Architecture, LabeledSample};
use crate::protocol::{MessageKind, Node, NodeConfig, NodeEvent, NodeStats, Outgoing, Target};
use crate::rng::{derive_rng, derive_seed, stream, StreamRng};

/// Something the driver saw, as written to `events.jsonl`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SimEvent {
    Node(NodeEvent),
    Net(NetEvent),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NetEvent {
    Sent { kind: &'static str, to: usize },
    Lost { kind: &'static str, to: usize },
    Undeliverable { kind: &'static str, to: Address },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimRecord {
    pub tick: u64,
    pub node: usize,
    #[serde(flatten)]
    pub event: SimEvent,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReputationRow {
    pub tick: u64,
    pub node: usize,
    pub peer: usize,
    pub reputation: f64,
}

/// Everything a run produced. Written out by [`write_run_dir`].
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub config: SimConfig,
    pub addresses: Vec<Address>,
    pub topology: Adjacency,
    pub partition: PartitionSpec,
    pub genesis: GenesisBlock,
    pub layer_names: Vec<&'static str>,
    pub frames: Vec<MetricsFrame>,
    pub events: Vec<SimRecord>,
    pub reputation: Vec<ReputationRow>,
    pub chains: Vec<Vec<Block>>,
    pub stats: Vec<NodeStats>,
}

impl RunArtifact {
    pub fn metrics_csv(&self) -> String {
        write_metrics_csv(&self.frames, &self.layer_names)
    }

    pub fn final_frame(&self) -> Option<&MetricsFrame> {
        self.frames.last()
    }

    pub fn node_index(&self, address: &Address) -> Option<usize> {
        self.addresses.iter().position(|a| a == address)
    }
}

fn load_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset), SimError> {
    Ok(match spec {
        DatasetSpec::Synthetic(cfg) => synthetic_split(cfg)?,
        DatasetSpec::Mnist { dir } => load_mnist(dir)?,
    })
}

struct Driver<'a> {
    config: &'a SimConfig,
    nodes: Vec<Node>,
    adjacency: Adjacency,
    index: HashMap<Address, usize>,
    loss_rng: StreamRng,
    events: Vec<SimRecord>,
}

impl Driver<'_> {
    fn record(&mut self, tick: u64, node: usize, event: SimEvent) {
        if self.config.record_events {
            self.events.push(SimRecord { tick, node, event });
        }
    }

    fn collect_node_events(&mut self, tick: u64, node: usize) {
        for e in self.nodes[node].take_events() {
            self.record(tick, node, SimEvent::Node(e));
        }
    }

    /// Delivers messages until every queue is empty. Zero delay: everything
    /// caused by an input happens within the same tick.
    fn pump(&mut self, tick: u64, origin: usize, out: Vec<Outgoing>) {
        let mut queue: VecDeque<(usize, Outgoing)> = out.into_iter().map(|o| (origin, o)).collect();
        while let Some((from, o)) = queue.pop_front() {
            let kind = o.message.kind();
            let targets: Vec<usize> = match &o.target {
                Target::AllPeers => self.adjacency[from].clone(),
                Target::Peer(addr) => match self.index.get(addr) {
                    Some(&to) if self.adjacency[from].contains(&to) => vec![to],
                    _ => {
                        let to = *addr;
                        self.record(tick, from, SimEvent::Net(NetEvent::Undeliverable { kind: kind.name(), to }));
                        continue;
                    }
                },
            };
            for to in targets {
                if kind == MessageKind::Confirmation
                    && self.config.confirmation_loss > 0.0
                    && self.loss_rng.random::<f64>() < self.config.confirmation_loss
                {
                    self.record(tick, from, SimEvent::Net(NetEvent::Lost { kind: kind.name(), to }));
                    continue;
                }
                self.record(tick, from, SimEvent::Net(NetEvent::Sent { kind: kind.name(), to }));
                let replies = self.nodes[to].on_message(o.message.clone(), tick);
                self.collect_node_events(tick, to);
                queue.extend(replies.into_iter().map(|r| (to, r)));
            }
        }
    }
}

/// Runs one simulation. Fully determined by the config and its seed.
pub fn run_simulation(config: &SimConfig) -> Result<RunArtifact, SimError> {
    config.validate()?;
    let n = config.node_count;
    let seed = config.seed;
    let (train, test) = load_dataset(&config.dataset)?;
    let arch = Architecture::mlp(train.feature_dim(), config.hidden_units, train.classes());
    let genesis = config.genesis(&arch);
    let topology = config.build_topology()?;
    let partition = make_partition(config.partition, n, train.classes(), seed)?;
    let initial = init_model(&arch.descriptor(), derive_seed(seed, &[stream::MODEL_INIT]))?;

    let slice_len = (config.test_batch_size as usize).min(test.len());
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let identity = generate_identity(Some(derive_seed(seed, &[stream::IDENTITY, i])));
        let mut slice_rng = derive_rng(seed, &[stream::TEST_SLICE, i]);
        let slice: Vec<LabeledSample> = sample(&mut slice_rng, test.len(), slice_len)
            .into_iter()
            .map(|j| test.get(j).clone())
            .collect();
        let node_config = NodeConfig {
            policy: config.policy.clone(),
            behavior: config.behavior(i as usize),
            ledger: config.ledger,
            confirmation_timeout: config.confirmation_timeout,
            record_events: config.record_events,
            ..NodeConfig::new(genesis.clone())
        };
        let attack_rng = derive_rng(seed, &[stream::ATTACK, i]);
        nodes.push(Node::new(identity, node_config, initial.clone(), slice, attack_rng)?);
    }
    let addresses: Vec<Address> = nodes.iter().map(|nd| *nd.address()).collect();
    for (i, node) in nodes.iter_mut().enumerate() {
        for &j in &topology[i] {
            node.add_peer(addresses[j]);
        }
    }

    let mut data_rngs: Vec<StreamRng> = (0..n as u64)
        .map(|i| derive_rng(seed, &[stream::DATA, i]))
        .collect();
    let mut schedule_rngs: Vec<StreamRng> = (0..n as u64)
        .map(|i| derive_rng(seed, &[stream::SCHEDULE, i]))
        .collect();
    let (low, high) = (config.injection_low, config.injection_high);
    let mut next_training: Vec<u64> = schedule_rngs
        .iter_mut()
        .map(|r| r.random_range(low..=high))
        .collect();

    let mut driver = Driver {
        config,
        nodes,
        adjacency: topology.clone(),
        index: addresses.iter().enumerate().map(|(i, a)| (*a, i)).collect(),
        loss_rng: derive_rng(seed, &[stream::LOSS]),
        events: Vec::new(),
    };
    let batch = config.batch_size as usize;
    let mut frames = Vec::new();
    let mut reputation = Vec::new();

    for tick in 1..=config.total_ticks {
        for i in 0..n {
            if tick != next_training[i] {
                continue;
            }
            next_training[i] = tick + schedule_rngs[i].random_range(low..=high);
            let samples = match config.behavior(i) {
                NodeBehavior::Observer => continue,
                NodeBehavior::DatasetPoisoner => {
                    poison_dataset_batch(train.feature_dim(), batch, train.classes(), &mut data_rngs[i])
                }
                _ => draw_training_batch(&partition, i, &train, batch, &mut data_rngs[i])?,
            };
            let out = driver.nodes[i].on_data(samples, tick);
            driver.collect_node_events(tick, i);
            driver.pump(tick, i, out);
        }
        for i in 0..n {
            let out = driver.nodes[i].on_tick(tick);
            driver.collect_node_events(tick, i);
            driver.pump(tick, i, out);
        }
        if tick % config.metrics_interval == 0 {
            let models: Vec<_> = driver.nodes.iter().map(|nd| nd.model()).collect();
            frames.push(collect_metrics(&models, test.samples(), tick)?);
            for (i, node) in driver.nodes.iter().enumerate() {
                for (peer, value) in node.reputation().iter() {
                    if let Some(&p) = driver.index.get(peer) {
                        reputation.push(ReputationRow { tick, node: i, peer: p, reputation: value });
                    }
                }
            }
        }
    }

    let Driver { nodes, events, .. } = driver;
    Ok(RunArtifact {
        config: config.clone(),
        addresses,
        topology,
        partition,
        genesis,
        layer_names: arch.layer_shapes().into_iter().map(|(name, _)| name).collect(),
        frames,
        events,
        reputation,
        chains: nodes.iter().map(|nd| nd.chain().to_vec()).collect(),
        stats: nodes.iter().map(|nd| nd.stats().clone()).collect(),
    })
}

/// First metrics tick at which `node` reached `target` accuracy.
pub fn ticks_to_accuracy(frames: &[MetricsFrame], node: usize, target: f64) -> Option<u64> {
    frames
        .iter()
        .find(|f| f.accuracy.get(node).is_some_and(|&a| a >= target))
        .map(|f| f.tick)
}

#[derive(Debug, Clone)]
pub struct RepetitionArtifact {
    pub runs: Vec<RunArtifact>,
    pub mean: Vec<MetricsFrame>,
}

/// Seed of repetition `r`: the master seed itself for the first, derived
/// seeds for the rest.
fn repetition_seed(master: u64, r: usize) -> u64 {
    if r == 0 {
        master
    } else {
        derive_seed(master, &[stream::REPETITION, r as u64])
    }
}

fn run_parallel(configs: Vec<SimConfig>) -> Result<Vec<RunArtifact>, SimError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| s.spawn(move || run_simulation(c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}

/// Runs `config.repetitions` independent seeds in parallel and averages
/// their metric series.
pub fn run_repetitions(config: &SimConfig) -> Result<RepetitionArtifact, SimError> {
    config.validate()?;
    let configs = (0..config.repetitions)
        .map(|r| SimConfig {
            seed: repetition_seed(config.seed, r),
            repetitions: 1,
            ..config.clone()
        })
        .collect();
    let runs = run_parallel(configs)?;
    let series: Vec<&[MetricsFrame]> = runs.iter().map(|r| r.frames.as_slice()).collect();
    let mean = mean_series(&series);
    Ok(RepetitionArtifact { runs, mean })
}

#[derive(Debug, Clone)]
pub struct RatioRun {
    pub buffer_size: u32,
    pub ticks_to_target: Option<u64>,
    pub artifact: RunArtifact,
}

#[derive(Debug, Clone)]
pub struct RatioArtifact {
    pub observer: usize,
    pub target_accuracy: f64,
    pub runs: Vec<RatioRun>,
}

impl RatioArtifact {
    /// `buffer,tick,observer_accuracy` rows for every run.
    pub fn observer_csv(&self) -> String {
        let mut out = String::from("buffer_size,tick,observer_accuracy\n");
        for r in &self.runs {
            for f in &r.artifact.frames {
                writeln!(out, "{},{},{}", r.buffer_size, f.tick, f.accuracy[self.observer]).unwrap();
            }
        }
        out
    }
}

/// Same seed, fully connected, node 0 an observer; one run per buffer size.
pub fn run_ratio_experiment(
    config: &SimConfig,
    buffer_sizes: &[u32],
    target_accuracy: f64,
) -> Result<RatioArtifact, SimError> {
    if buffer_sizes.is_empty() {
        return Err(SimError::Config("no buffer sizes given".into()));
    }
    let mut base = config.clone();
    base.topology = TopologySpec::Full;
    base.behaviors.insert(0, NodeBehavior::Observer);
    let configs: Vec<SimConfig> = buffer_sizes
        .iter()
        .map(|&b| SimConfig { buffer_size: b, ..base.clone() })
        .collect();
    for c in &configs {
        c.validate()?;
    }
    let runs = run_parallel(configs)?
        .into_iter()
        .zip(buffer_sizes)
        .map(|(artifact, &buffer_size)| RatioRun {
            buffer_size,
            ticks_to_target: ticks_to_accuracy(&artifact.frames, 0, target_accuracy),
            artifact,
        })
        .collect();
    Ok(RatioArtifact { observer: 0, target_accuracy, runs })
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    config: &'a SimConfig,
    addresses: &'a [Address],
    topology: &'a Adjacency,
    partition: &'a PartitionSpec,
    genesis: &'a GenesisBlock,
    stats: &'a [NodeStats],
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), SimError> {
    fs::write(path, contents).map_err(|e| SimError::io(path, e))
}

/// Writes `metrics.csv`, `events.jsonl`, `reputation.csv`, `config-echo.json`
/// and, with the ledger on, one chain directory per node under `chains/`.
pub fn write_run_dir(artifact: &RunArtifact, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    write_file(&dir.join("metrics.csv"), artifact.metrics_csv().as_bytes())?;

    let mut events = String::new();
    for e in &artifact.events {
        events.push_str(&serde_json::to_string(e).expect("events serialize"));
        events.push('\n');
    }
    write_file(&dir.join("events.jsonl"), events.as_bytes())?;

    let mut rep = String::from("tick,node_id,peer_id,reputation\n");
    for r in &artifact.reputation {
        writeln!(rep, "{},{},{},{}", r.tick, r.node, r.peer, r.reputation).unwrap();
    }
    write_file(&dir.join("reputation.csv"), rep.as_bytes())?;

    let echo = ConfigEcho {
        config: &artifact.config,
        addresses: &artifact.addresses,
        topology: &artifact.topology,
        partition: &artifact.partition,
        genesis: &artifact.genesis,
        stats: &artifact.stats,
    };
    let json = serde_json::to_string_pretty(&echo).expect("config serializes");
    write_file(&dir.join("config-echo.json"), json.as_bytes())?;

    if artifact.config.ledger {
        for (i, chain) in artifact.chains.iter().enumerate() {
            write_chain_dir(&dir.join("chains").join(format!("node-{i}")), chain, &artifact.genesis)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SyntheticConfig;

    fn small() -> SimConfig {
        SimConfig {
            node_count: 4,
            total_ticks: 120,
            hidden_units: 8,
            batch_size: 16,
            test_batch_size: 50,
            dataset: DatasetSpec::Synthetic(SyntheticConfig {
                classes: 4,
                feature_dim: 6,
                train_per_class: 100,
                test_per_class: 25,
                ..Default::default()
            }),
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_metrics_and_frame_count() {
        let a = run_simulation(&small()).unwrap();
        let b = run_simulation(&small()).unwrap();
        assert_eq!(a.metrics_csv(), b.metrics_csv());
        assert_eq!(a.frames.len(), 12);
        assert_ne!(
            a.metrics_csv(),
            run_simulation(&SimConfig { seed: 9, ..small() }).unwrap().metrics_csv()
        );
    }

    #[test]
    fn ledger_is_observational() {
        let on = run_simulation(&small()).unwrap();
        let off = run_simulation(&SimConfig { ledger: false, ..small() }).unwrap();
        assert_eq!(on.metrics_csv(), off.metrics_csv());
        assert!(on.chains.iter().any(|c| !c.is_empty()));
        assert!(off.chains.iter().all(|c| c.is_empty()));
    }

    #[test]
    fn zero_delay_receipts_in_the_broadcast_tick() {
        let a = run_simulation(&small()).unwrap();
        let trained: Vec<_> = a
            .events
            .iter()
            .filter_map(|r| match &r.event {
                SimEvent::Node(NodeEvent::Trained { transaction, .. }) => Some((r.tick, *transaction)),
                _ => None,
            })
            .collect();
        assert!(!trained.is_empty());
        for (tick, tx) in trained {
            assert!(a.events.iter().any(|r| r.tick == tick
                && matches!(&r.event, SimEvent::Node(NodeEvent::Receipted { transaction, .. }) if *transaction == tx)));
        }
    }

    #[test]
    fn observer_never_trains() {
        let mut c = small();
        c.behaviors.insert(2, NodeBehavior::Observer);
        let a = run_simulation(&c).unwrap();
        assert_eq!(a.stats[2].trainings, 0);
        assert!(a.stats[2].updates > 0);
    }

    #[test]
    fn run_dir_layout() {
        let a = run_simulation(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_dir(&a, dir.path()).unwrap();
        for f in ["metrics.csv", "events.jsonl", "reputation.csv", "config-echo.json"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert!(dir.path().join("chains/node-0/chain.dfl").is_file());
        let first = fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
        let v: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert!(v["event"].is_string() && v["tick"].is_u64());
    }

    #[test]
    fn repetitions_and_ratio() {
        let r = run_repetitions(&SimConfig { repetitions: 3, ..small() }).unwrap();
        assert_eq!(r.runs.len(), 3);
        assert_eq!(r.runs[0].metrics_csv(), run_simulation(&small()).unwrap().metrics_csv());
        assert_eq!(r.mean.len(), r.runs[0].frames.len());

        let ratio = run_ratio_experiment(&small(), &[8, 2], 0.5).unwrap();
        assert_eq!(ratio.runs.len(), 2);
        assert_eq!(ratio.runs[1].artifact.stats[0].trainings, 0);
        assert_eq!(ratio.runs[1].artifact.topology[0], vec![1, 2, 3]);
    }
}
