//! Toolchain for assessing network anomaly detectors on time-sensitive
//! in-vehicle Ethernet backbones.
//!
//! The crate is split along the data flow:
//!
//! - [`scenario`]: declarative scenario documents (topology, streams,
//!   anomalies, capture points), inheritance, wildcard expansion, validation.
//! - [`sim`]: deterministic discrete-event simulation with TAS, CBS, strict
//!   priority, FRER and a bounded-offset clock model.
//! - [`anomaly`]: link-layer anomaly injection at egress ports with phase
//!   scheduling and dual packet/phase labels.
//! - [`dataset`]: labeled PCAPNG capture files and the dataset library.
//! - [`nads`]: stream filtering, windowed metrics, detectors and scoring.
//!
//! All simulated times are integer nanoseconds.

pub mod anomaly;
pub mod dataset;
pub mod net;
pub mod nads;
pub mod rng;
pub mod scenario;
pub mod sim;

/// Simulation time in integer nanoseconds.
pub type Nanos = u64;

pub const NS_PER_SEC: u64 = 1_000_000_000;
