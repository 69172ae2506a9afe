use serde::Serialize;

use crate::crypto::Address;
use crate::protocol::NodeEvent;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TransportEvent {
    PeerUp { peer: Address },
    PeerDown { peer: Address },
    DialFailed { target: String, cause: String },
    Sent { kind: &'static str, to: Address },
    SendDropped { kind: &'static str, to: Address, cause: &'static str },
    FrameDropped { peer: Address, cause: String },
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum LogEvent {
    Node(NodeEvent),
    Transport(TransportEvent),
}

/// One line of a node's `events.jsonl`.
#[derive(Debug, Clone, Serialize)]
pub struct LogRecord {
    /// Unix seconds.
    pub time: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}
