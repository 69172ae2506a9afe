//! Deployable node: framed messages over TCP, a peer table with
//! reconnecting dialers, a built-in data generator, and CPU-time
//! profiling of every protocol phase.

mod config;
pub mod frame;
mod log;
mod peer;
mod runner;
mod stats;

use thiserror::Error;

pub use self::log::{LogEvent, LogRecord, TransportEvent};
pub use config::NodeRunConfig;
pub use frame::{read_frame, write_frame, Frame, FrameError, Hello};
pub use runner::{run_node, spawn_node, write_outputs, NodeReport, RunningNode};
pub use stats::{export_stats, ChainStats, StatsError};

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid node configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Store(#[from] crate::ledger::store::StoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("node thread panicked")]
    Panicked,
}

impl NetError {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        NetError::Io {
            context: context.into(),
            source,
        }
    }
}
