//! Per-task CPU time accounting.
//!
//! Categories mirror the four phases of a node (generate block, generate
//! transaction, update model, receive transactions), each split into its
//! network/ML work and its blockchain overhead.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    GatherConfirmation,
    BlockchainOverheadBlock,
    BroadcastTransaction,
    MeasureAccuracy,
    BlockchainOverheadTx,
    CalculateSelfAccuracy,
    BlockchainOverheadUpdate,
    BroadcastGeneratedTransaction,
    CalculateAccuracy,
    BlockchainOverheadReceive,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::GatherConfirmation,
        Category::BlockchainOverheadBlock,
        Category::BroadcastTransaction,
        Category::MeasureAccuracy,
        Category::BlockchainOverheadTx,
        Category::CalculateSelfAccuracy,
        Category::BlockchainOverheadUpdate,
        Category::BroadcastGeneratedTransaction,
        Category::CalculateAccuracy,
        Category::BlockchainOverheadReceive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::GatherConfirmation => "gather_confirmation",
            Category::BlockchainOverheadBlock => "blockchain_overhead_block",
            Category::BroadcastTransaction => "broadcast_transaction",
            Category::MeasureAccuracy => "measure_accuracy",
            Category::BlockchainOverheadTx => "blockchain_overhead_tx",
            Category::CalculateSelfAccuracy => "calculate_self_accuracy",
            Category::BlockchainOverheadUpdate => "blockchain_overhead_update",
            Category::BroadcastGeneratedTransaction => "broadcast_generated_transaction",
            Category::CalculateAccuracy => "calculate_accuracy",
            Category::BlockchainOverheadReceive => "blockchain_overhead_receive",
        }
    }

    pub fn is_blockchain_overhead(self) -> bool {
        matches!(
            self,
            Category::BlockchainOverheadBlock
                | Category::BlockchainOverheadTx
                | Category::BlockchainOverheadUpdate
                | Category::BlockchainOverheadReceive
        )
    }

    fn index(self) -> usize {
        Category::ALL.iter().position(|&c| c == self).expect("listed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerMode {
    ThreadCpu,
    Monotonic,
}

#[cfg(unix)]
fn thread_cpu_nanos() -> Option<u64> {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    (rc == 0).then(|| ts.tv_sec as u64 * 1_000_000_000 + ts.tv_nsec as u64)
}

#[cfg(not(unix))]
fn thread_cpu_nanos() -> Option<u64> {
    None
}

/// Lock-free accumulator shared between a node's threads.
#[derive(Debug)]
pub struct Profiler {
    mode: TimerMode,
    nanos: [AtomicU64; 10],
    started: Instant,
}

impl Default for Profiler {
    fn default() -> Self {
        Self::new()
    }
}

impl Profiler {
    pub fn new() -> Self {
        let mode = if thread_cpu_nanos().is_some() {
            TimerMode::ThreadCpu
        } else {
            TimerMode::Monotonic
        };
        Self {
            mode,
            nanos: Default::default(),
            started: Instant::now(),
        }
    }

    pub fn mode(&self) -> TimerMode {
        self.mode
    }

    fn now(&self) -> u64 {
        match self.mode {
            TimerMode::ThreadCpu => thread_cpu_nanos().unwrap_or(0),
            TimerMode::Monotonic => self.started.elapsed().as_nanos() as u64,
        }
    }

    pub fn time<T>(&self, category: Category, f: impl FnOnce() -> T) -> T {
        let start = self.now();
        let out = f();
        self.add(category, self.now().saturating_sub(start));
        out
    }

    pub fn add(&self, category: Category, nanos: u64) {
        self.nanos[category.index()].fetch_add(nanos, Ordering::Relaxed);
    }

    pub fn report(&self) -> ProfilerReport {
        let seconds = Category::ALL
            .iter()
            .map(|&c| {
                (
                    c.name().to_string(),
                    self.nanos[c.index()].load(Ordering::Relaxed) as f64 / 1e9,
                )
            })
            .collect();
        ProfilerReport::new(self.mode, seconds, self.started.elapsed().as_secs_f64())
    }
}

/// Cumulative seconds per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilerReport {
    pub mode: TimerMode,
    pub seconds: Vec<(String, f64)>,
    pub total_seconds: f64,
    pub blockchain_overhead_seconds: f64,
    /// Blockchain overhead over all categories; zero when nothing was timed.
    pub blockchain_overhead_fraction: f64,
    pub wall_clock_seconds: f64,
}

impl ProfilerReport {
    fn new(mode: TimerMode, seconds: Vec<(String, f64)>, wall_clock_seconds: f64) -> Self {
        let total: f64 = seconds.iter().map(|(_, s)| s).sum();
        let overhead: f64 = seconds
            .iter()
            .filter(|(n, _)| {
                Category::ALL
                    .iter()
                    .any(|c| c.name() == n && c.is_blockchain_overhead())
            })
            .map(|(_, s)| s)
            .sum();
        Self {
            mode,
            seconds,
            total_seconds: total,
            blockchain_overhead_seconds: overhead,
            blockchain_overhead_fraction: if total > 0.0 { overhead / total } else { 0.0 },
            wall_clock_seconds,
        }
    }

    pub fn get(&self, category: Category) -> f64 {
        self.seconds
            .iter()
            .find(|(n, _)| n == category.name())
            .map_or(0.0, |(_, s)| *s)
    }
}
