use std::fs;
use std::net::{SocketAddr, TcpListener};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{channel, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::seq::index::sample;

use super::config::NodeRunConfig;
use super::frame::{Frame, Hello};
use super::log::{LogEvent, LogRecord, TransportEvent};
use super::peer::{Inbound, SendOutcome, Transport};
use super::stats::{export_stats, ChainStats};
use super::NetError;
use crate::crypto::{generate_identity, Address};
use crate::data::{draw_training_batch, make_partition, poison_dataset_batch, Dataset, NodeBehavior};
use crate::ledger::store::write_chain_dir;
use crate::ledger::{Block, GenesisBlock};
use crate::model::{init_model, Architecture, LabeledSample};
use crate::profiler::{Category, Profiler, ProfilerReport};
use crate::protocol::{Message, Node, NodeConfig, NodeStats, Outgoing, Target};
use crate::rng::{derive_rng, derive_seed, stream};
use crate::sim::DatasetSpec;

const LOOP_WAIT: Duration = Duration::from_millis(50);
const INGEST_STEP: Duration = Duration::from_millis(100);

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// What a node leaves behind after shutdown.
#[derive(Debug, Clone)]
pub struct NodeReport {
    pub address: Address,
    pub genesis: GenesisBlock,
    pub chain: Vec<Block>,
    /// `None` while the chain is still empty.
    pub chain_stats: Option<ChainStats>,
    pub profile: ProfilerReport,
    pub node_stats: NodeStats,
    pub halted: Option<String>,
}

/// Handle to a node running on background threads.
pub struct RunningNode {
    local_addr: SocketAddr,
    address: Address,
    stop: Arc<AtomicBool>,
    blocks: Arc<AtomicU64>,
    handle: JoinHandle<Result<NodeReport, NetError>>,
}

impl RunningNode {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn address(&self) -> &Address {
        &self.address
    }

    /// Finalized blocks so far.
    pub fn blocks(&self) -> u64 {
        self.blocks.load(Ordering::Relaxed)
    }

    pub fn is_finished(&self) -> bool {
        self.handle.is_finished()
    }

    /// Asks the node to stop without waiting for it.
    pub fn signal_stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }

    pub fn stop(self) -> Result<NodeReport, NetError> {
        self.signal_stop();
        self.wait()
    }

    /// Blocks until the node stops on its own (`run_seconds`,
    /// `stop_after_blocks`) or is stopped.
    pub fn wait(self) -> Result<NodeReport, NetError> {
        self.handle.join().map_err(|_| NetError::Panicked)?
    }
}

fn load_dataset(spec: &DatasetSpec) -> Result<(Dataset, Dataset), NetError> {
    Ok(match spec {
        DatasetSpec::Synthetic(cfg) => crate::data::synthetic_split(cfg)?,
        DatasetSpec::Mnist { dir } => crate::data::mnist::load_mnist(dir)?,
    })
}

/// Binds the listener, starts the transport, ingestion and protocol threads
/// and returns immediately.
pub fn spawn_node(config: NodeRunConfig) -> Result<RunningNode, NetError> {
    config.validate()?;
    let (train, test) = load_dataset(&config.dataset)?;
    let arch = Architecture::mlp(train.feature_dim(), config.hidden_units, train.classes());
    let genesis = config.genesis(&arch);
    let seed = config.seed;
    let i = config.node_index as u64;
    let model = init_model(&arch.descriptor(), derive_seed(seed, &[stream::MODEL_INIT]))?;
    let slice_len = (config.hyperparameters.test_batch_size as usize).min(test.len());
    let mut slice_rng = derive_rng(seed, &[stream::TEST_SLICE, i]);
    let slice: Vec<LabeledSample> = sample(&mut slice_rng, test.len(), slice_len)
        .into_iter()
        .map(|j| test.get(j).clone())
        .collect();
    let identity = generate_identity(config.identity_seed);
    let address = *identity.address();
    let hello = Hello { public_key: *identity.public_key() };

    let profiler = Arc::new(Profiler::new());
    let node_config = NodeConfig {
        policy: config.policy.clone(),
        behavior: config.behavior,
        confirmation_timeout: config.confirmation_timeout,
        ..NodeConfig::new(genesis.clone())
    };
    let node = Node::new(identity, node_config, model, slice, derive_rng(seed, &[stream::ATTACK, i]))?
        .with_profiler(profiler.clone());

    let listener = TcpListener::bind(&config.listen).map_err(|e| NetError::io(format!("bind {}", config.listen), e))?;
    let local_addr = listener.local_addr().map_err(|e| NetError::io("local address", e))?;
    log::info!("node {address} listening on {local_addr}");

    let stop = Arc::new(AtomicBool::new(false));
    let blocks = Arc::new(AtomicU64::new(0));
    let (inbox_tx, inbox) = channel();
    let transport = Transport::new(hello, inbox_tx.clone(), profiler.clone(), config.outbound_queue, stop.clone());
    {
        let t = transport.clone();
        thread::spawn(move || t.accept_loop(listener));
    }
    for target in &config.peers {
        let (t, target) = (transport.clone(), target.clone());
        thread::spawn(move || t.dial_loop(target));
    }

    let ingest_ready = Arc::new(AtomicBool::new(false));
    if config.behavior.trains() {
        let partition = make_partition(config.partition, config.node_count, train.classes(), seed)?;
        let ctx = Ingest {
            rate: config.samples_per_second,
            node_index: config.node_index,
            poison: config.behavior == NodeBehavior::DatasetPoisoner,
            stop: stop.clone(),
            ready: ingest_ready.clone(),
            inbox: inbox_tx,
        };
        let mut rng = derive_rng(seed, &[stream::DATA, i]);
        thread::spawn(move || {
            ctx.run(|n| {
                if ctx.poison {
                    Ok(poison_dataset_batch(train.feature_dim(), n, train.classes(), &mut rng))
                } else {
                    draw_training_batch(&partition, ctx.node_index, &train, n, &mut rng)
                }
            })
        });
    } else {
        drop(inbox_tx);
    }

    let handle = {
        let (stop, blocks) = (stop.clone(), blocks.clone());
        thread::spawn(move || {
            let mut lp = Loop {
                node,
                transport,
                config,
                genesis,
                profiler,
                events: Vec::new(),
                stop,
                blocks,
                ingest_ready,
            };
            lp.run(inbox)
        })
    };
    Ok(RunningNode { local_addr, address, stop, blocks, handle })
}

/// Runs a node in the foreground until it stops.
pub fn run_node(config: NodeRunConfig) -> Result<NodeReport, NetError> {
    spawn_node(config)?.wait()
}

struct Ingest {
    rate: f64,
    node_index: usize,
    poison: bool,
    stop: Arc<AtomicBool>,
    ready: Arc<AtomicBool>,
    inbox: Sender<Inbound>,
}

impl Ingest {
    /// Injects `rate` samples per second once the loop reports the required
    /// peers as connected.
    fn run(&self, mut draw: impl FnMut(usize) -> Result<Vec<LabeledSample>, crate::data::DataError>) {
        while !self.ready.load(Ordering::Relaxed) {
            if self.stop.load(Ordering::Relaxed) {
                return;
            }
            thread::sleep(LOOP_WAIT);
        }
        let start = Instant::now();
        let mut sent = 0usize;
        while !self.stop.load(Ordering::Relaxed) {
            thread::sleep(INGEST_STEP);
            let due = (start.elapsed().as_secs_f64() * self.rate) as usize;
            if due > sent {
                match draw(due - sent) {
                    Ok(samples) => {
                        if self.inbox.send(Inbound::Data(samples)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        log::error!("node {} cannot draw data: {e}", self.node_index);
                        return;
                    }
                }
                sent = due;
            }
        }
    }
}

struct Loop {
    node: Node,
    transport: Arc<Transport>,
    config: NodeRunConfig,
    genesis: GenesisBlock,
    profiler: Arc<Profiler>,
    events: Vec<LogRecord>,
    stop: Arc<AtomicBool>,
    blocks: Arc<AtomicU64>,
    ingest_ready: Arc<AtomicBool>,
}

impl Loop {
    fn log(&mut self, event: LogEvent) {
        self.events.push(LogRecord { time: unix_now(), event });
    }

    fn should_stop(&self, started: Instant) -> bool {
        self.stop.load(Ordering::Relaxed)
            || self.config.run_seconds.is_some_and(|s| started.elapsed().as_secs_f64() >= s)
            || self.config.stop_after_blocks.is_some_and(|b| self.node.chain().len() as u64 >= b)
    }

    fn run(&mut self, inbox: std::sync::mpsc::Receiver<Inbound>) -> Result<NodeReport, NetError> {
        let started = Instant::now();
        let needed = self.config.wait_for_peers.unwrap_or(self.config.peers.len());
        while !self.should_stop(started) {
            let now = unix_now();
            let out = match inbox.recv_timeout(LOOP_WAIT) {
                Ok(Inbound::Data(samples)) => self.node.on_data(samples, now),
                Ok(Inbound::Message(m)) => self.node.on_message(m, now),
                Ok(Inbound::PeerUp(p)) => {
                    self.node.add_peer(p);
                    self.log(LogEvent::Transport(TransportEvent::PeerUp { peer: p }));
                    Vec::new()
                }
                Ok(Inbound::PeerDown(p)) => {
                    self.node.remove_peer(&p);
                    self.log(LogEvent::Transport(TransportEvent::PeerDown { peer: p }));
                    Vec::new()
                }
                Ok(Inbound::Transport(e)) => {
                    self.log(LogEvent::Transport(e));
                    Vec::new()
                }
                Err(RecvTimeoutError::Timeout) => Vec::new(),
                Err(RecvTimeoutError::Disconnected) => {
                    thread::sleep(LOOP_WAIT);
                    Vec::new()
                }
            };
            self.dispatch(out);
            let out = self.node.on_tick(now);
            self.dispatch(out);
            for e in self.node.take_events() {
                self.log(LogEvent::Node(e));
            }
            self.blocks.store(self.node.chain().len() as u64, Ordering::Relaxed);
            if !self.ingest_ready.load(Ordering::Relaxed) && self.node.peers().len() >= needed {
                log::info!("{} peers connected, starting data ingestion", self.node.peers().len());
                self.ingest_ready.store(true, Ordering::Relaxed);
            }
            if let Some(err) = self.node.halted() {
                log::error!("node halted: {err}");
                break;
            }
        }
        self.stop.store(true, Ordering::Relaxed);
        self.transport.shutdown_all();
        self.finish()
    }

    fn dispatch(&mut self, out: Vec<Outgoing>) {
        let me = *self.node.address();
        for o in out {
            let category = match &o.message {
                Message::Transaction(t) if t.generator == me => Category::BroadcastGeneratedTransaction,
                Message::Transaction(_) | Message::ReceiptedTransaction(_) => Category::BroadcastTransaction,
                Message::DraftBlock(_) | Message::Confirmation(_) => Category::GatherConfirmation,
            };
            let kind = o.message.kind().name();
            let frame = self
                .profiler
                .time(category, || Arc::new(Frame::Message(o.message).encode()));
            let targets: Vec<Address> = match o.target {
                Target::AllPeers => self.node.peers().iter().copied().collect(),
                Target::Peer(p) => vec![p],
            };
            for to in targets {
                let event = match self.profiler.time(category, || self.transport.send(&to, category, frame.clone())) {
                    SendOutcome::Queued => TransportEvent::Sent { kind, to },
                    SendOutcome::Dropped(cause) => {
                        log::warn!("send of {kind} to {to} dropped: {cause}");
                        TransportEvent::SendDropped { kind, to, cause }
                    }
                };
                self.log(LogEvent::Transport(event));
            }
        }
    }

    fn finish(&mut self) -> Result<NodeReport, NetError> {
        for e in self.node.take_events() {
            self.log(LogEvent::Node(e));
        }
        let chain = self.node.chain().to_vec();
        let report = NodeReport {
            address: *self.node.address(),
            genesis: self.genesis.clone(),
            chain_stats: export_stats(&chain).ok(),
            chain,
            profile: self.profiler.report(),
            node_stats: self.node.stats().clone(),
            halted: self.node.halted().map(str::to_string),
        };
        log::info!(
            "node stopped: {} blocks, blockchain overhead {:.2}% of profiled CPU time",
            report.chain.len(),
            report.profile.blockchain_overhead_fraction * 100.0
        );
        if let Some(dir) = self.config.output_dir.clone() {
            write_outputs(&dir, &report, &self.events)?;
        }
        Ok(report)
    }
}

/// `chain/`, `events.jsonl`, `profile.json`, `node.json` and, when the
/// chain is not empty, `stats.json`.
pub fn write_outputs(dir: &Path, report: &NodeReport, events: &[LogRecord]) -> Result<(), NetError> {
    fs::create_dir_all(dir).map_err(|e| NetError::io(dir.display().to_string(), e))?;
    write_chain_dir(&dir.join("chain"), &report.chain, &report.genesis)?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| NetError::io(p.display().to_string(), e))
    };
    let mut lines = String::new();
    for e in events {
        lines.push_str(&serde_json::to_string(e).expect("events serialize"));
        lines.push('\n');
    }
    write("events.jsonl", lines)?;
    write("profile.json", serde_json::to_string_pretty(&report.profile).expect("report serializes"))?;
    write(
        "node.json",
        serde_json::to_string_pretty(&serde_json::json!({
            "address": report.address,
            "stats": report.node_stats,
            "halted": report.halted,
        }))
        .expect("stats serialize"),
    )?;
    if let Some(s) = &report.chain_stats {
        write("stats.json", serde_json::to_string_pretty(s).expect("stats serialize"))?;
    }
    Ok(())
}
