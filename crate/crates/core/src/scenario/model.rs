use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyConfig;
use crate::Nanos;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub base: Option<String>,
    pub duration_ns: Nanos,
    pub seed: u64,
    pub topology: Topology,
    #[serde(default)]
    pub streams: Vec<StreamSpec>,
    #[serde(default)]
    pub anomalies: Vec<AnomalyConfig>,
    #[serde(default)]
    pub capture_points: Vec<CaptureSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Endpoint,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
}

/// `node.port` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PortRef {
    pub node: String,
    pub port: String,
}

impl TryFrom<String> for PortRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.rsplit_once('.') {
            Some((n, p)) if !n.is_empty() && !p.is_empty() => Ok(PortRef { node: n.to_string(), port: p.to_string() }),
            _ => Err(format!("port reference {s:?} must look like node.port")),
        }
    }
}

impl From<PortRef> for String {
    fn from(p: PortRef) -> String {
        p.to_string()
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.node, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub a: PortRef,
    pub b: PortRef,
    pub rate_bps: u64,
    pub propagation_delay_ns: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingClass {
    /// Gated by the time-aware shaper.
    Timed,
    /// Credit-based shaper.
    Shaped,
    StrictPriority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasConfig {
    pub cycle_ns: Nanos,
    pub window_ns: Nanos,
    /// Window opens this long after the expected arrival at a switch.
    pub hop_offset_ns: Nanos,
}

impl Default for TasConfig {
    fn default() -> Self {
        TasConfig { cycle_ns: 1_000_000, window_ns: 10_000, hop_offset_ns: 30_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbsConfig {
    /// Idle slope per shaped stream relative to its wire rate.
    pub reserve_factor: f64,
}

impl Default for CbsConfig {
    fn default() -> Self {
        CbsConfig { reserve_factor: 1.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchingConfig {
    pub processing_delay_ns: Nanos,
    /// Frames per PCP queue per egress port.
    pub queue_capacity: usize,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        SwitchingConfig { processing_delay_ns: 2_000, queue_capacity: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    /// Grandmaster; its clock is perfect.
    #[serde(default)]
    pub master: Option<String>,
    /// Per-node drift is drawn uniformly from `±drift_ppm`.
    pub drift_ppm: f64,
    pub sync_interval_ns: Nanos,
    pub post_sync_offset_bound_ns: Nanos,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig { master: None, drift_ppm: 1.0, sync_interval_ns: 125_000_000, post_sync_offset_bound_ns: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrerConfig {
    pub history_length: usize,
}

impl Default for FrerConfig {
    fn default() -> Self {
        FrerConfig { history_length: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    /// Shaping class per PCP. PCPs not listed use strict priority.
    #[serde(default)]
    pub pcp_classes: BTreeMap<u8, ShapingClass>,
    #[serde(default)]
    pub tas: TasConfig,
    #[serde(default)]
    pub cbs: CbsConfig,
    #[serde(default)]
    pub switching: SwitchingConfig,
    #[serde(default)]
    pub clock: ClockConfig,
    #[serde(default)]
    pub frer: FrerConfig,
    /// After `duration_ns` sources stop and in-flight frames get this long
    /// to reach their listeners.
    #[serde(default = "default_drain")]
    pub drain_ns: Nanos,
}

fn default_drain() -> Nanos {
    10_000_000
}

impl Topology {
    pub fn class_of(&self, pcp: u8) -> ShapingClass {
        self.pcp_classes.get(&pcp).copied().unwrap_or(ShapingClass::StrictPriority)
    }

    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Cycle {
    Fixed(Nanos),
    Uniform([Nanos; 2]),
    /// Exponential inter-arrivals with the given mean.
    Exponential(Nanos),
}

impl Cycle {
    pub fn mean_ns(&self) -> f64 {
        match *self {
            Cycle::Fixed(c) | Cycle::Exponential(c) => c as f64,
            Cycle::Uniform([lo, hi]) => (lo as f64 + hi as f64) / 2.0,
        }
    }

    pub fn min_ns(&self) -> Nanos {
        match *self {
            Cycle::Fixed(c) => c,
            Cycle::Uniform([lo, _]) => lo,
            Cycle::Exponential(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Transport {
    UdpTunnel { dest_port: u16 },
    Raw,
}

/// Where duplicates of a redundant stream are eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryPoint {
    #[default]
    Listener,
    /// The switch the listener is attached to.
    LastSwitch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub id: String,
    pub pcp: u8,
    /// Node name; a trailing `*` creates one stream per matching node.
    pub source: String,
    pub destinations: Vec<String>,
    pub frame_size: u32,
    pub cycle: Cycle,
    #[serde(default)]
    pub start_offset_ns: Nanos,
    pub shaping_class: ShapingClass,
    #[serde(default)]
    pub redundant: bool,
    #[serde(default)]
    pub recovery: RecoveryPoint,
    pub transport: Transport,
    /// UDP payload length for tunneled streams; the rest of the frame is
    /// Ethernet padding. Defaults to filling the frame.
    #[serde(default)]
    pub payload_bytes: Option<u32>,
    #[serde(default = "default_vlan")]
    pub vlan: u16,
}

pub fn default_vlan() -> u16 {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureDirection {
    In,
    Out,
    Both,
}

impl CaptureDirection {
    pub fn directions(self) -> &'static [crate::net::Direction] {
        use crate::net::Direction::*;
        match self {
            CaptureDirection::In => &[In],
            CaptureDirection::Out => &[Out],
            CaptureDirection::Both => &[In, Out],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptureSpec {
    pub node: String,
    pub port: String,
    pub direction: CaptureDirection,
    /// Record only these stream ids (after wildcard expansion). All traffic
    /// when absent.
    #[serde(default)]
    pub streams: Option<Vec<String>>,
}

/// Communication matrix reference, expanded into streams at parse time.
/// Kept out of [`ScenarioConfig`] so a parsed config serializes back to a
/// document that parses to the same value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRef {
    pub path: String,
    pub pcp: u8,
    pub shaping_class: ShapingClass,
    /// Row `i` of the matrix tunnels to UDP port `dest_port_base + i`.
    pub dest_port_base: u16,
    #[serde(default = "default_vlan")]
    pub vlan: u16,
}
