//! Labeled captures, their PCAPNG encoding, and the on-disk dataset library.

pub mod label;
pub mod library;
pub mod pcapng;

use serde::{Deserialize, Serialize};

use crate::anomaly::LabelPair;
use crate::net::Direction;
use crate::Nanos;

pub use label::{encode_label, parse_label, LabelError};
pub use library::{sha256_hex, EntryWriter, FileEntry, IntegrityIssue, LibraryError, RunManifest};
pub use pcapng::{
    check_structure, encode_capture_point, read_capture, read_capture_bytes, write_capture, write_capture_point, PcapError,
    ReadReport,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPacket {
    /// Local-clock timestamp of the capturing node.
    pub ts: Nanos,
    pub frame: Vec<u8>,
    pub labels: LabelPair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfaceMeta {
    /// `<node>-<port>-<dir>`, e.g. `switchFrontRight-eth0-in`.
    pub name: String,
    pub speed_bps: Option<u64>,
    pub direction: Option<Direction>,
}

impl InterfaceMeta {
    pub fn new(node: &str, port: &str, dir: Direction, speed_bps: u64) -> Self {
        InterfaceMeta { name: format!("{node}-{port}-{dir}"), speed_bps: Some(speed_bps), direction: Some(dir) }
    }

    /// Node and port parsed back from the name, when it follows the pattern.
    pub fn node_port(&self) -> Option<(&str, &str)> {
        let mut it = self.name.rsplitn(3, '-');
        let dir = it.next()?;
        let port = it.next()?;
        let node = it.next()?;
        dir.parse::<Direction>().ok()?;
        Some((node, port))
    }

    /// Direction suffix of an interface name, if present.
    pub fn direction_from_name(name: &str) -> Option<Direction> {
        name.rsplit('-').next()?.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapturePoint {
    pub meta: InterfaceMeta,
    pub packets: Vec<LabeledPacket>,
}

impl CapturePoint {
    pub fn new(meta: InterfaceMeta) -> Self {
        CapturePoint { meta, packets: Vec::new() }
    }

    /// File name inside a library entry.
    pub fn file_name(&self, scenario: &str) -> String {
        match (self.meta.node_port(), self.meta.direction) {
            (Some((node, port)), Some(dir)) => format!("{scenario}_{node}_{port}_{dir}.pcapng"),
            _ => format!("{scenario}_{}.pcapng", self.meta.name),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureSet {
    pub points: Vec<CapturePoint>,
}

impl CaptureSet {
    pub fn point(&self, name: &str) -> Option<&CapturePoint> {
        self.points.iter().find(|p| p.meta.name == name)
    }

    pub fn packet_count(&self) -> usize {
        self.points.iter().map(|p| p.packets.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interface_names() {
        let m = InterfaceMeta::new("switchFrontRight", "eth0", Direction::In, 1_000_000_000);
        assert_eq!(m.name, "switchFrontRight-eth0-in");
        assert_eq!(m.node_port(), Some(("switchFrontRight", "eth0")));
        let cp = CapturePoint::new(m);
        assert_eq!(cp.file_name("base"), "base_switchFrontRight_eth0_in.pcapng");
        assert_eq!(InterfaceMeta::direction_from_name("x-eth1-out"), Some(Direction::Out));
        assert_eq!(InterfaceMeta::direction_from_name("wlan0"), None);
    }
}
