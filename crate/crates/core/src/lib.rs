pub mod broker;
pub mod consensus;
pub mod contract;
pub mod demos;
pub mod econ;
pub mod identity;
pub mod ledger;
pub mod p2p;
pub mod privacy;
pub mod transport;
pub mod types;
pub mod workload;

pub use types::{Did, Digest, NodeId, TimestampMs};
