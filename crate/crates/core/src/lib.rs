//! Deterministic simulator and optimizer for relay-assisted federated
//! learning in industrial subnetworks: channel generation, TDMA airtime
//! and energy accounting, relay grouping with deadline pruning,
//! SPCA transmit-power optimization under perfect and imperfect CSI, a
//! desk-scale FedAvg loop with partial aggregation at relays, and a
//! Monte-Carlo experiment runner.

pub mod airtime;
pub mod bench;
pub mod channel;
pub mod error;
pub mod fedsim;
pub mod grouping;
pub mod powopt;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
