//! Link-layer anomalies applied at egress ports: configuration, phase
//! scheduling, triggering and labels.

mod ledger;
mod stage;

pub use ledger::{AnomalyLedger, LedgerEntry};
pub use stage::{AnomalyTarget, EgressStage, Emit, StageStats};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nads::filter::StreamFilter;
use crate::Nanos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Delay,
    Eliminate,
    Inject,
    Manipulate,
    Reorder,
}

impl AnomalyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyKind::Delay => "delay",
            AnomalyKind::Eliminate => "eliminate",
            AnomalyKind::Inject => "inject",
            AnomalyKind::Manipulate => "manipulate",
            AnomalyKind::Reorder => "reorder",
        }
    }

    /// Label carried by packets directly affected by this kind. Eliminated
    /// packets never reach a capture, so they have none.
    pub fn packet_label(self) -> Option<PacketLabel> {
        match self {
            AnomalyKind::Delay => Some(PacketLabel::Delayed),
            AnomalyKind::Eliminate => None,
            AnomalyKind::Inject => Some(PacketLabel::Injected),
            AnomalyKind::Manipulate => Some(PacketLabel::Manipulated),
            AnomalyKind::Reorder => Some(PacketLabel::Reordered),
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnomalyParams {
    Delay {
        amount_ns: Nanos,
    },
    Eliminate {},
    Inject {
        period_ns: Nanos,
        /// Payload bytes written after the copied headers. When absent the
        /// target stream's regular payload layout is used.
        #[serde(default)]
        payload_hex: Option<String>,
    },
    Manipulate {
        /// Byte offset into the frame.
        offset: usize,
        replacement_hex: String,
    },
    Reorder {
        /// Number of later matching packets the held packet is moved behind.
        displacement: u32,
    },
}

impl AnomalyParams {
    pub fn kind(&self) -> AnomalyKind {
        match self {
            AnomalyParams::Delay { .. } => AnomalyKind::Delay,
            AnomalyParams::Eliminate {} => AnomalyKind::Eliminate,
            AnomalyParams::Inject { .. } => AnomalyKind::Inject,
            AnomalyParams::Manipulate { .. } => AnomalyKind::Manipulate,
            AnomalyParams::Reorder { .. } => AnomalyKind::Reorder,
        }
    }
}

/// Egress port the anomaly sits on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyLocation {
    pub node: String,
    pub port: String,
    #[serde(default = "out_dir")]
    pub direction: crate::net::Direction,
}

fn out_dir() -> crate::net::Direction {
    crate::net::Direction::Out
}

/// Square-wave activation schedule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    pub start_ns: Nanos,
    pub active_ns: Nanos,
    #[serde(default)]
    pub inactive_ns: Nanos,
    pub label: String,
}

impl PhaseSpec {
    pub fn is_active(&self, t: Nanos) -> bool {
        if t < self.start_ns || self.active_ns == 0 {
            return false;
        }
        let period = self.active_ns + self.inactive_ns;
        (t - self.start_ns) % period < self.active_ns
    }

    /// Active intervals `[a, b)` intersecting `[from, until)`, in order.
    pub fn active_intervals(&self, from: Nanos, until: Nanos) -> Vec<(Nanos, Nanos)> {
        let mut out = Vec::new();
        if self.active_ns == 0 || until <= self.start_ns {
            return out;
        }
        let period = self.active_ns + self.inactive_ns;
        let mut k = from.saturating_sub(self.start_ns) / period;
        loop {
            let a = self.start_ns + k * period;
            if a >= until {
                break;
            }
            let b = if self.inactive_ns == 0 { Nanos::MAX } else { a + self.active_ns };
            let (lo, hi) = (a.max(from), b.min(until));
            if lo < hi {
                out.push((lo, hi));
            }
            if self.inactive_ns == 0 {
                break;
            }
            k += 1;
        }
        out
    }
}

/// Returns the phase label iff `t` lies in an active interval.
pub fn phase_active(phase: &PhaseSpec, t: Nanos) -> Option<&str> {
    phase.is_active(t).then_some(phase.label.as_str())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyConfig {
    pub id: String,
    pub kind: AnomalyKind,
    pub location: AnomalyLocation,
    pub target_filter: StreamFilter,
    pub phase: PhaseSpec,
    pub probability: f64,
    #[serde(default)]
    pub min_clearance_ns: Nanos,
    pub params: AnomalyParams,
}

/// Clearance- and phase-gated Bernoulli trigger. The random draw is consumed
/// only when both gates pass, so the decision stream of one anomaly depends
/// on nothing but its own candidate instants.
pub fn decide_action<R: Rng + ?Sized>(
    cfg: &AnomalyConfig,
    t: Nanos,
    last_action: &mut Option<Nanos>,
    rng: &mut R,
) -> bool {
    if !cfg.phase.is_active(t) {
        return false;
    }
    if let Some(last) = *last_action {
        if t.saturating_sub(last) < cfg.min_clearance_ns {
            return false;
        }
    }
    let fire = if cfg.probability >= 1.0 {
        // Still draw so p = 1 and p < 1 consume the stream identically.
        let _: f64 = rng.gen();
        true
    } else {
        rng.gen::<f64>() < cfg.probability
    };
    if fire {
        *last_action = Some(t);
    }
    fire
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum PacketLabel {
    #[default]
    #[serde(rename = "BENIGN")]
    Benign,
    #[serde(rename = "BENIGN RECOVERED")]
    BenignRecovered,
    #[serde(rename = "DELAYED")]
    Delayed,
    #[serde(rename = "INJECTED")]
    Injected,
    #[serde(rename = "MANIPULATED")]
    Manipulated,
    #[serde(rename = "REORDERED")]
    Reordered,
}

impl PacketLabel {
    pub const ALL: [PacketLabel; 6] = [
        PacketLabel::Benign,
        PacketLabel::BenignRecovered,
        PacketLabel::Delayed,
        PacketLabel::Injected,
        PacketLabel::Manipulated,
        PacketLabel::Reordered,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PacketLabel::Benign => "BENIGN",
            PacketLabel::BenignRecovered => "BENIGN RECOVERED",
            PacketLabel::Delayed => "DELAYED",
            PacketLabel::Injected => "INJECTED",
            PacketLabel::Manipulated => "MANIPULATED",
            PacketLabel::Reordered => "REORDERED",
        }
    }

    pub fn is_benign(self) -> bool {
        self == PacketLabel::Benign
    }

    /// True for labels set by an anomaly action on the packet itself.
    pub fn is_anomalous(self) -> bool {
        !matches!(self, PacketLabel::Benign | PacketLabel::BenignRecovered)
    }
}

impl fmt::Display for PacketLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown packet label {0:?}")]
pub struct UnknownLabel(pub String);

impl FromStr for PacketLabel {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, UnknownLabel> {
        PacketLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownLabel(s.to_string()))
    }
}

/// Packet label plus the dataset-wide phase label (empty when no phase is
/// active; several simultaneous phases are joined with `+`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelPair {
    pub packet: PacketLabel,
    pub phase: String,
}

impl LabelPair {
    pub fn new(packet: PacketLabel, phase: impl Into<String>) -> Self {
        LabelPair { packet, phase: phase.into() }
    }

    pub fn benign() -> Self {
        LabelPair::default()
    }
}

/// Phase label at true time `t` over a set of anomaly schedules.
pub fn phase_label_at(anomalies: &[AnomalyConfig], t: Nanos) -> String {
    let mut labels: Vec<&str> = Vec::new();
    for a in anomalies {
        if let Some(l) = phase_active(&a.phase, t) {
            if !labels.contains(&l) {
                labels.push(l);
            }
        }
    }
    labels.join("+")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::site_rng;

    pub(crate) fn cfg(p: f64, clearance: Nanos, phase: PhaseSpec) -> AnomalyConfig {
        AnomalyConfig {
            id: "a".into(),
            kind: AnomalyKind::Eliminate,
            location: AnomalyLocation { node: "sw".into(), port: "eth0".into(), direction: crate::net::Direction::Out },
            target_filter: StreamFilter::udp_dst(1),
            phase,
            probability: p,
            min_clearance_ns: clearance,
            params: AnomalyParams::Eliminate {},
        }
    }

    fn square(start: Nanos) -> PhaseSpec {
        PhaseSpec { start_ns: start, active_ns: 1_000_000_000, inactive_ns: 1_000_000_000, label: "x".into() }
    }

    #[test]
    fn square_wave() {
        let p = square(2_000_000_000);
        assert_eq!(phase_active(&p, 2_500_000_000), Some("x"));
        assert_eq!(phase_active(&p, 3_500_000_000), None);
        assert_eq!(phase_active(&p, 1_000_000_000), None);
        assert_eq!(phase_active(&p, 2_000_000_000), Some("x"));
        assert_eq!(phase_active(&p, 3_000_000_000), None);
        assert_eq!(phase_active(&p, 4_000_000_000), Some("x"));
    }

    #[test]
    fn active_intervals_clip() {
        let p = square(1_000_000_000);
        let iv = p.active_intervals(0, 4_500_000_000);
        assert_eq!(iv, vec![(1_000_000_000, 2_000_000_000), (3_000_000_000, 4_000_000_000)]);
        let always = PhaseSpec { start_ns: 5, active_ns: 1, inactive_ns: 0, label: "y".into() };
        assert_eq!(always.active_intervals(0, 100), vec![(5, 100)]);
        assert!(always.is_active(99));
    }

    #[test]
    fn certainty_and_inactive_phase() {
        let mut rng = site_rng(1, "t");
        let c = cfg(1.0, 0, square(0));
        let mut last = None;
        for t in (0..1_000_000_000).step_by(1_000_000) {
            assert!(decide_action(&c, t, &mut last, &mut rng));
        }
        for t in (1_000_000_000..2_000_000_000u64).step_by(1_000_000) {
            assert!(!decide_action(&c, t, &mut last, &mut rng));
        }
    }

    #[test]
    fn clearance_is_respected() {
        let mut rng = site_rng(3, "t");
        let c = cfg(0.5, 10_000_000, square(0));
        let mut last = None;
        let mut times = Vec::new();
        for t in (0..1_000_000_000).step_by(1_000_000) {
            if decide_action(&c, t, &mut last, &mut rng) {
                times.push(t);
            }
        }
        assert!(times.len() <= 100);
        assert!(times.windows(2).all(|w| w[1] - w[0] >= 10_000_000));
    }

    #[test]
    fn label_strings() {
        for l in PacketLabel::ALL {
            assert_eq!(l.as_str().parse::<PacketLabel>(), Ok(l));
        }
        assert!("GARBAGE".parse::<PacketLabel>().is_err());
    }

    #[test]
    fn overlapping_phase_labels_join() {
        let mut a = cfg(1.0, 0, square(0));
        let mut b = a.clone();
        a.phase.label = "first".into();
        b.phase.label = "second".into();
        assert_eq!(phase_label_at(&[a.clone(), b], 10), "first+second");
        assert_eq!(phase_label_at(&[a], 1_500_000_000), "");
    }
}
