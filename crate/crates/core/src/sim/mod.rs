//! Tick-based simulator: N protocol nodes on one virtual clock with
//! zero-delay delivery, seeded data injection and metric frames.

mod config;
mod metrics;
mod run;
mod topology;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{DatasetSpec, SimConfig, TopologySpec};
pub use metrics::{collect_metrics, mean_series, write_metrics_csv, MetricsFrame};
pub use run::{
    run_ratio_experiment, run_repetitions, run_simulation, ticks_to_accuracy, write_run_dir,
    RatioArtifact, RatioRun, RepetitionArtifact, RunArtifact, SimEvent, SimRecord,
};
pub use topology::{full_topology, generate_topology, is_connected, validate_topology, Adjacency};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error(transparent)]
    Store(#[from] crate::ledger::store::StoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl SimError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}
