//! Deterministic discrete-event simulation of a TSN backbone.
//!
//! [`run_simulation`] takes a validated scenario and produces the labeled
//! captures, per-listener statistics and the anomaly ledger. Shaping
//! primitives (gates, credits, frame recovery, clocks) are exposed as small
//! standalone pieces so they can be checked in isolation.

pub mod cbs;
pub mod clock;
mod engine;
pub mod frame;
pub mod frer;
pub mod plan;
pub mod stats;
pub mod tas;

use thiserror::Error;

pub use cbs::{cbs_transmit_time, CreditState};
pub use clock::ClockModel;
pub use engine::{run_simulation, SimOptions, SimOutput};
pub use frer::{frer_accept, RecoveryState};
pub use plan::{build_plan, Plan};
pub use stats::{ConservationRow, ListenerStats, SourceStats, StatsReport, TxRecord};
pub use tas::{tas_gate_transmit_time, GateSchedule, TasError};

use crate::nads::filter::StreamFilter;
use crate::net::{HeaderView, ETHERTYPE_AVTP, ETHERTYPE_IPV4};
use crate::scenario::{Issue, ResolvedStream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario is not runnable: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Issue>),
    #[error("stream {stream}: cannot be scheduled on {iface}: {source}")]
    Unschedulable {
        stream: String,
        iface: String,
        #[source]
        source: TasError,
    },
}

/// Whether the frames of `s` satisfy the header criteria of `f`.
/// Interface and direction criteria are ignored.
pub fn stream_matches(f: &StreamFilter, s: &ResolvedStream) -> bool {
    let udp = s.udp_dst();
    let h = HeaderView {
        dmac: s.dmac,
        smac: s.smac,
        vlan: Some(s.vlan),
        pcp: Some(s.pcp),
        ethertype: if udp.is_some() { ETHERTYPE_IPV4 } else { ETHERTYPE_AVTP },
        udp_dst: udp,
    };
    f.matches_header(&h)
}
