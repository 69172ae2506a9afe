//! The per-node state machine. Every handler consumes one input and returns
//! the messages to send; nothing blocks on a remote reply, so the same code
//! runs under the simulator's virtual clock and over real sockets.

mod event;
mod message;
mod node;

pub use event::NodeEvent;
pub use message::{Message, MessageKind, Outgoing, Target};
pub use node::{Node, NodeConfig, NodeStats, ProtocolError};

#[cfg(test)]
mod tests;
