pub mod codec;
pub mod crypto;
pub mod data;
pub mod ledger;
pub mod model;
pub mod profiler;
pub mod protocol;
pub mod reputation;
pub mod rng;
pub mod sim;
pub mod net;
