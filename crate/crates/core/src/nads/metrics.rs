//! Packet-triggered observation windows and their four features.
//!
//! A window opens at a packet. By default it closes at the first packet at
//! or after `open + nominal`; that packet is the last member and the real
//! length runs up to it, so windows are slightly longer than nominal. The
//! next window opens at the following packet.
//!
//! Cycle jitter is the mean absolute deviation of the inter-arrival gaps
//! from the window's median gap. All sums are kept as integers; the float
//! features are single divisions of those sums.

use serde::{Deserialize, Serialize};

use crate::anomaly::PacketLabel;
use crate::dataset::LabeledPacket;
use crate::{Nanos, NS_PER_SEC};

pub const DEFAULT_WINDOW_NS: Nanos = 100_000_000;
pub const FEATURE_NAMES: [&str; 4] = ["bandwidth_bps", "avg_frame_size", "avg_frame_gap_ns", "avg_cycle_jitter_ns"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Benign,
    Abnormal,
}

impl Truth {
    pub fn is_abnormal(self) -> bool {
        self == Truth::Abnormal
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Truth::Benign => "benign",
            Truth::Abnormal => "abnormal",
        }
    }
}

/// What happens to the packet that ends a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// It is the last member of the closing window.
    #[default]
    IncludeTrigger,
    /// It opens the next window; the closing window ends at its timestamp.
    TriggerOpensNext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub nominal_ns: Nanos,
    pub closure: Closure,
    /// Emit the unfinished trailing window, stretched to the nominal length.
    pub flush: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { nominal_ns: DEFAULT_WINDOW_NS, closure: Closure::IncludeTrigger, flush: false }
    }
}

/// Exact integer ingredients of the features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WindowSums {
    pub packets: u64,
    pub bytes: u64,
    /// Last member timestamp minus first; the sum of all gaps.
    pub gap_sum_ns: u64,
    /// Sum over gaps of |2 * gap - 2 * median|.
    pub jitter2_sum_ns: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub start: Nanos,
    pub nominal_length: Nanos,
    pub real_length: Nanos,
    pub bandwidth_bps: f64,
    pub avg_frame_size: f64,
    pub avg_frame_gap_ns: f64,
    pub avg_cycle_jitter_ns: f64,
    pub packet_count: u64,
    pub ground_truth: Truth,
    pub sums: WindowSums,
}

impl MetricWindow {
    pub fn features(&self) -> [f64; 4] {
        [self.bandwidth_bps, self.avg_frame_size, self.avg_frame_gap_ns, self.avg_cycle_jitter_ns]
    }
}

/// Abnormal iff any member carries a label other than BENIGN. BENIGN
/// RECOVERED counts: it is the only trace an eliminated packet leaves.
pub fn derive_ground_truth(members: &[LabeledPacket]) -> Truth {
    if members.iter().any(|p| p.labels.packet != PacketLabel::Benign) {
        Truth::Abnormal
    } else {
        Truth::Benign
    }
}

/// Twice the median of `v` (exact for even lengths).
fn median2(v: &mut [u64]) -> u64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        2 * v[n / 2]
    } else {
        v[n / 2 - 1] + v[n / 2]
    }
}

pub fn window_sums(members: &[LabeledPacket]) -> WindowSums {
    let bytes = members.iter().map(|p| p.frame.len() as u64).sum();
    let mut gaps: Vec<u64> = members.windows(2).map(|w| w[1].ts - w[0].ts).collect();
    let gap_sum_ns = gaps.iter().sum();
    let jitter2_sum_ns = if gaps.is_empty() {
        0
    } else {
        let m2 = median2(&mut gaps);
        gaps.iter().map(|&g| (2 * g).abs_diff(m2)).sum()
    };
    WindowSums { packets: members.len() as u64, bytes, gap_sum_ns, jitter2_sum_ns }
}

fn build(members: &[LabeledPacket], start: Nanos, nominal: Nanos, real: Nanos) -> MetricWindow {
    let s = window_sums(members);
    let gaps = s.packets.saturating_sub(1);
    MetricWindow {
        start,
        nominal_length: nominal,
        real_length: real,
        bandwidth_bps: if real == 0 { 0.0 } else { (s.bytes * 8) as f64 * NS_PER_SEC as f64 / real as f64 },
        avg_frame_size: s.bytes as f64 / s.packets as f64,
        avg_frame_gap_ns: if gaps == 0 { 0.0 } else { s.gap_sum_ns as f64 / gaps as f64 },
        avg_cycle_jitter_ns: if gaps == 0 { 0.0 } else { s.jitter2_sum_ns as f64 / (2 * gaps) as f64 },
        packet_count: s.packets,
        ground_truth: derive_ground_truth(members),
        sums: s,
    }
}

/// Splits time-ordered packets into windows.
pub fn compute_window_metrics(packets: &[LabeledPacket], cfg: &WindowConfig) -> Vec<MetricWindow> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < packets.len() {
        let open = packets[i].ts;
        let close_at = open.saturating_add(cfg.nominal_ns);
        // First packet at or after the nominal end, never the opener itself.
        let trigger = (i + 1..packets.len()).find(|&j| packets[j].ts >= close_at);
        match (trigger, cfg.closure) {
            (Some(j), Closure::IncludeTrigger) => {
                out.push(build(&packets[i..=j], open, cfg.nominal_ns, packets[j].ts - open));
                i = j + 1;
            }
            (Some(j), Closure::TriggerOpensNext) => {
                out.push(build(&packets[i..j], open, cfg.nominal_ns, packets[j].ts - open));
                i = j;
            }
            (None, _) => {
                if cfg.flush {
                    let last = packets[packets.len() - 1].ts;
                    out.push(build(&packets[i..], open, cfg.nominal_ns, (last - open).max(cfg.nominal_ns)));
                }
                break;
            }
        }
    }
    out
}
