//! Wildcard expansion of stream sources and destinations.

use super::model::{Cycle, RecoveryPoint, ScenarioConfig, ShapingClass, Transport};
use super::validate::Issue;
use crate::net::{node_smac, stream_dmac, MacAddr, FCS_LEN};

/// A stream with concrete source and listener nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStream {
    pub id: String,
    /// Index of the originating entry in `ScenarioConfig::streams`.
    pub spec_index: usize,
    pub source: String,
    pub destinations: Vec<String>,
    pub pcp: u8,
    pub frame_size: u32,
    /// Bytes after the headers that carry the sequence number and filler.
    pub payload_len: u32,
    pub cycle: Cycle,
    pub start_offset_ns: u64,
    pub shaping_class: ShapingClass,
    pub redundant: bool,
    pub recovery: RecoveryPoint,
    pub transport: Transport,
    pub vlan: u16,
    pub dmac: MacAddr,
    pub smac: MacAddr,
}

impl ResolvedStream {
    pub fn udp_dst(&self) -> Option<u16> {
        match self.transport {
            Transport::UdpTunnel { dest_port } => Some(dest_port),
            Transport::Raw => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamPlan {
    pub streams: Vec<ResolvedStream>,
}

impl StreamPlan {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.streams.iter().position(|s| s.id == id)
    }
}

/// Node names matched by `pattern`: exact name, or prefix match when the
/// pattern ends in `*`.
pub fn expand_pattern<'a>(pattern: &str, nodes: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    match pattern.strip_suffix('*') {
        Some(prefix) => nodes.into_iter().filter(|n| n.starts_with(prefix)).map(str::to_string).collect(),
        None => nodes.into_iter().filter(|n| *n == pattern).map(str::to_string).collect(),
    }
}

pub const VLAN_ETH_HEADER: u32 = 18;
pub const IP_UDP_HEADER: u32 = 28;

/// Expands every stream spec. Problems are reported as issues and the
/// offending (source, stream) pair is skipped.
pub fn resolve_streams(cfg: &ScenarioConfig) -> (StreamPlan, Vec<Issue>) {
    let names: Vec<&str> = cfg.topology.nodes.iter().map(|n| n.name.as_str()).collect();
    let mut plan = StreamPlan::default();
    let mut issues = Vec::new();
    for (i, s) in cfg.streams.iter().enumerate() {
        let path = format!("streams[{i}]");
        let sources = expand_pattern(&s.source, names.iter().copied());
        if sources.is_empty() {
            issues.push(Issue::new(
                format!("{path}.source"),
                format!("stream {}: source node {:?} does not exist", s.id, s.source),
            ));
            continue;
        }
        let wildcard = s.source.ends_with('*');
        for src in sources {
            let mut dests: Vec<String> = Vec::new();
            let mut ok = true;
            for (j, d) in s.destinations.iter().enumerate() {
                let m = expand_pattern(d, names.iter().copied());
                if m.is_empty() {
                    issues.push(Issue::new(
                        format!("{path}.destinations[{j}]"),
                        format!("stream {}: destination node {d:?} does not exist", s.id),
                    ));
                    ok = false;
                }
                for n in m {
                    if n != src && !dests.contains(&n) {
                        dests.push(n);
                    }
                }
            }
            if !ok {
                continue;
            }
            if dests.is_empty() {
                issues.push(Issue::new(format!("{path}.destinations"), format!("stream {}: no listener besides the source", s.id)));
                continue;
            }
            let id = if wildcard { format!("{}.{}", s.id, src) } else { s.id.clone() };
            let headers = match s.transport {
                Transport::UdpTunnel { .. } => VLAN_ETH_HEADER + IP_UDP_HEADER,
                Transport::Raw => VLAN_ETH_HEADER,
            };
            let room = s.frame_size.saturating_sub(headers + FCS_LEN as u32);
            let payload_len = match (s.transport, s.payload_bytes) {
                (Transport::UdpTunnel { .. }, Some(p)) => p,
                _ => room,
            };
            plan.streams.push(ResolvedStream {
                dmac: stream_dmac(&id),
                smac: node_smac(&src),
                id,
                spec_index: i,
                source: src,
                destinations: dests,
                pcp: s.pcp,
                frame_size: s.frame_size,
                payload_len,
                cycle: s.cycle,
                start_offset_ns: s.start_offset_ns,
                shaping_class: s.shaping_class,
                redundant: s.redundant,
                recovery: s.recovery,
                transport: s.transport,
                vlan: s.vlan,
            });
        }
    }
    (plan, issues)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn patterns() {
        let nodes = ["zCFrontLeft", "zCRearLeft", "adas", "zoo"];
        assert_eq!(expand_pattern("zC*", nodes), vec!["zCFrontLeft", "zCRearLeft"]);
        assert_eq!(expand_pattern("z*", nodes).len(), 3);
        assert_eq!(expand_pattern("*", nodes).len(), 4);
        assert_eq!(expand_pattern("adas", nodes), vec!["adas"]);
        assert!(expand_pattern("zCNowhere", nodes).is_empty());
        assert!(expand_pattern("zC", nodes).is_empty());
    }
}
