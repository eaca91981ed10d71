use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::model::{Cycle, NodeKind, RecoveryPoint, ScenarioConfig, ShapingClass, Transport};
use super::resolve::{resolve_streams, IP_UDP_HEADER, VLAN_ETH_HEADER};
use crate::anomaly::AnomalyParams;
use crate::net::{Direction, FCS_LEN, MAX_FRAME, MIN_FRAME};

/// One finding, located by a JSON-style path into the document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl Issue {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Issue { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    pub resolved_stream_count: usize,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks every structural invariant and, when those hold, that the network
/// plan (routes, gate schedules, shaper reservations) can be built.
pub fn validate_scenario(cfg: &ScenarioConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    let err = |r: &mut ValidationReport, p: String, m: String| r.errors.push(Issue::new(p, m));
    let warn = |r: &mut ValidationReport, p: String, m: String| r.warnings.push(Issue::new(p, m));

    if cfg.name.trim().is_empty() {
        err(&mut r, "name".into(), "scenario name is empty".into());
    }
    if cfg.duration_ns == 0 {
        err(&mut r, "duration_ns".into(), "duration must be positive".into());
    }

    let topo = &cfg.topology;
    let mut kinds: BTreeMap<&str, NodeKind> = BTreeMap::new();
    for (i, n) in topo.nodes.iter().enumerate() {
        if n.name.is_empty() || n.name.contains('.') || n.name.contains('*') {
            err(&mut r, format!("topology.nodes[{i}].name"), format!("invalid node name {:?}", n.name));
        }
        if kinds.insert(&n.name, n.kind).is_some() {
            err(&mut r, format!("topology.nodes[{i}].name"), format!("duplicate node name {:?}", n.name));
        }
    }
    let mut ports: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut links_of: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, l) in topo.links.iter().enumerate() {
        for (side, p) in [("a", &l.a), ("b", &l.b)] {
            let path = format!("topology.links[{i}].{side}");
            if !kinds.contains_key(p.node.as_str()) {
                err(&mut r, path, format!("link endpoint {p} names unknown node {:?}", p.node));
                continue;
            }
            if let Some(prev) = ports.insert((p.node.clone(), p.port.clone()), i) {
                err(&mut r, path, format!("port {p} already used by link {prev}"));
            }
            *links_of.entry(p.node.as_str()).or_default() += 1;
        }
        if l.a.node == l.b.node {
            err(&mut r, format!("topology.links[{i}]"), "link connects a node to itself".into());
        }
        if l.rate_bps == 0 {
            err(&mut r, format!("topology.links[{i}].rate_bps"), "link rate must be positive".into());
        }
    }
    for (name, kind) in &kinds {
        let n = links_of.get(name).copied().unwrap_or(0);
        if *kind == NodeKind::Endpoint && n > 1 {
            err(&mut r, "topology.links".into(), format!("endpoint {name} has {n} links; endpoints attach with exactly one"));
        }
    }
    for pcp in topo.pcp_classes.keys() {
        if *pcp > 7 {
            err(&mut r, format!("topology.pcp_classes.{pcp}"), "PCP must be 0-7".into());
        }
    }
    let tas = &topo.tas;
    if tas.cycle_ns == 0 || tas.window_ns == 0 || tas.window_ns >= tas.cycle_ns {
        err(&mut r, "topology.tas".into(), "need 0 < window_ns < cycle_ns".into());
    }
    if !(topo.cbs.reserve_factor.is_finite() && topo.cbs.reserve_factor > 0.0) {
        err(&mut r, "topology.cbs.reserve_factor".into(), "reserve factor must be positive".into());
    }
    if topo.switching.queue_capacity == 0 {
        err(&mut r, "topology.switching.queue_capacity".into(), "queue capacity must be positive".into());
    }
    if topo.frer.history_length == 0 {
        err(&mut r, "topology.frer.history_length".into(), "history length must be positive".into());
    }
    let clk = &topo.clock;
    if clk.sync_interval_ns == 0 {
        err(&mut r, "topology.clock.sync_interval_ns".into(), "sync interval must be positive".into());
    }
    if !(clk.drift_ppm.is_finite() && (0.0..1000.0).contains(&clk.drift_ppm)) {
        err(&mut r, "topology.clock.drift_ppm".into(), "drift must be within [0, 1000) ppm".into());
    }
    if let Some(m) = &clk.master {
        if !kinds.contains_key(m.as_str()) {
            err(&mut r, "topology.clock.master".into(), format!("clock master {m:?} does not exist"));
        }
    }

    for (i, s) in cfg.streams.iter().enumerate() {
        let path = format!("streams[{i}]");
        if s.id.is_empty() {
            err(&mut r, format!("{path}.id"), "stream id is empty".into());
        }
        if s.pcp > 7 {
            err(&mut r, format!("{path}.pcp"), format!("stream {}: PCP {} out of range 0-7", s.id, s.pcp));
        }
        let fs = s.frame_size as usize;
        if fs < MIN_FRAME {
            err(&mut r, format!("{path}.frame_size"), format!("stream {}: frame_size {fs} is below the 64-byte Ethernet minimum", s.id));
        } else if fs > MAX_FRAME {
            err(&mut r, format!("{path}.frame_size"), format!("stream {}: frame_size {fs} exceeds the 1522-byte maximum", s.id));
        }
        match s.cycle {
            Cycle::Fixed(0) | Cycle::Exponential(0) => {
                err(&mut r, format!("{path}.cycle"), format!("stream {}: cycle must be positive", s.id))
            }
            Cycle::Uniform([lo, hi]) if lo == 0 || lo > hi => {
                err(&mut r, format!("{path}.cycle"), format!("stream {}: uniform cycle needs 0 < lo <= hi", s.id))
            }
            _ => {}
        }
        if s.pcp <= 7 && topo.class_of(s.pcp) != s.shaping_class {
            err(
                &mut r,
                format!("{path}.shaping_class"),
                format!("stream {}: PCP {} is mapped to {:?}, not {:?}", s.id, s.pcp, topo.class_of(s.pcp), s.shaping_class),
            );
        }
        if s.shaping_class == ShapingClass::Timed {
            match s.cycle {
                Cycle::Fixed(c) if tas.cycle_ns > 0 && c % tas.cycle_ns == 0 => {}
                _ => err(
                    &mut r,
                    format!("{path}.cycle"),
                    format!("stream {}: timed streams need a fixed cycle that is a multiple of the {} ns gate cycle", s.id, tas.cycle_ns),
                ),
            }
        }
        if s.vlan > 4095 {
            err(&mut r, format!("{path}.vlan"), format!("stream {}: VLAN id {} out of range", s.id, s.vlan));
        }
        let headers = match s.transport {
            Transport::UdpTunnel { .. } => VLAN_ETH_HEADER + IP_UDP_HEADER,
            Transport::Raw => VLAN_ETH_HEADER,
        };
        let room = s.frame_size.saturating_sub(headers + FCS_LEN as u32);
        match (s.transport, s.payload_bytes) {
            (Transport::Raw, Some(_)) => {
                warn(&mut r, format!("{path}.payload_bytes"), format!("stream {}: payload_bytes ignored for raw streams", s.id))
            }
            (Transport::UdpTunnel { .. }, Some(p)) if p > room => err(
                &mut r,
                format!("{path}.payload_bytes"),
                format!("stream {}: {p}-byte payload does not fit a {}-byte frame", s.id, s.frame_size),
            ),
            _ => {}
        }
        if room < 8 && fs >= MIN_FRAME {
            err(&mut r, format!("{path}.frame_size"), format!("stream {}: frame too small for the sequence number", s.id));
        }
        if s.recovery == RecoveryPoint::LastSwitch && !s.redundant {
            warn(&mut r, format!("{path}.recovery"), format!("stream {}: recovery point has no effect without redundancy", s.id));
        }
    }

    let (plan, issues) = resolve_streams(cfg);
    r.errors.extend(issues);
    r.resolved_stream_count = plan.streams.len();
    let mut ids = BTreeSet::new();
    let mut macs = BTreeMap::new();
    for s in &plan.streams {
        let path = format!("streams[{}]", s.spec_index);
        if !ids.insert(s.id.as_str()) {
            err(&mut r, path.clone(), format!("duplicate stream id {:?}", s.id));
        }
        if let Some(other) = macs.insert(s.dmac, s.id.as_str()) {
            if other != s.id {
                err(&mut r, path.clone(), format!("streams {other} and {} hash to the same destination MAC", s.id));
            }
        }
        for n in std::iter::once(&s.source).chain(&s.destinations) {
            if kinds.get(n.as_str()) == Some(&NodeKind::Endpoint) && !links_of.contains_key(n.as_str()) {
                err(&mut r, path.clone(), format!("stream {}: endpoint {n} is not linked", s.id));
            }
        }
    }

    // Streams that failed to resolve were already reported; references to
    // them should not add a second error.
    let mut declared = ids.clone();
    declared.extend(cfg.streams.iter().filter(|s| !s.source.ends_with('*')).map(|s| s.id.as_str()));

    let port_linked = |node: &str, port: &str| ports.contains_key(&(node.to_string(), port.to_string()));
    let mut anomaly_ids = BTreeSet::new();
    for (i, a) in cfg.anomalies.iter().enumerate() {
        let path = format!("anomalies[{i}]");
        if !anomaly_ids.insert(a.id.as_str()) {
            err(&mut r, format!("{path}.id"), format!("duplicate anomaly id {:?}", a.id));
        }
        if a.kind != a.params.kind() {
            err(&mut r, format!("{path}.params"), format!("anomaly {}: params are for {} but kind is {}", a.id, a.params.kind(), a.kind));
        }
        if !(a.probability.is_finite() && (0.0..=1.0).contains(&a.probability)) {
            err(&mut r, format!("{path}.probability"), format!("anomaly {}: probability {} outside [0, 1]", a.id, a.probability));
        }
        if a.phase.active_ns == 0 {
            warn(&mut r, format!("{path}.phase"), format!("anomaly {}: phase is never active", a.id));
        }
        let loc = &a.location;
        if !kinds.contains_key(loc.node.as_str()) {
            err(&mut r, format!("{path}.location.node"), format!("anomaly {}: node {:?} does not exist", a.id, loc.node));
        } else if !port_linked(&loc.node, &loc.port) {
            err(&mut r, format!("{path}.location.port"), format!("anomaly {}: port {}.{} is not linked", a.id, loc.node, loc.port));
        }
        if loc.direction != Direction::Out {
            err(&mut r, format!("{path}.location.direction"), format!("anomaly {}: anomalies act on egress ports only", a.id));
        }
        let f = &a.target_filter;
        if f.iface().is_some() || f.direction().is_some() {
            warn(&mut r, format!("{path}.target_filter"), format!("anomaly {}: iface/dir criteria are ignored for anomaly targets", a.id));
        }
        if let Some(sid) = f.stream_id() {
            if !declared.contains(sid) {
                err(&mut r, format!("{path}.target_filter.stream"), format!("anomaly {}: stream {sid:?} does not exist", a.id));
            }
        }
        let targets: Vec<_> = plan.streams.iter().filter(|s| crate::sim::stream_matches(f, s)).collect();
        if targets.is_empty() {
            warn(&mut r, format!("{path}.target_filter"), format!("anomaly {}: filter matches no stream", a.id));
        }
        match &a.params {
            AnomalyParams::Delay { amount_ns } if *amount_ns == 0 => {
                warn(&mut r, format!("{path}.params"), format!("anomaly {}: zero delay", a.id))
            }
            AnomalyParams::Inject { period_ns, payload_hex } => {
                if *period_ns == 0 {
                    err(&mut r, format!("{path}.params.period_ns"), format!("anomaly {}: injection period must be positive", a.id));
                }
                if targets.len() != 1 {
                    err(
                        &mut r,
                        format!("{path}.target_filter"),
                        format!("anomaly {}: injection needs exactly one template stream, filter matches {}", a.id, targets.len()),
                    );
                }
                if let Some(h) = payload_hex {
                    if hex::decode(h).is_err() {
                        err(&mut r, format!("{path}.params.payload_hex"), format!("anomaly {}: payload is not valid hex", a.id));
                    }
                }
            }
            AnomalyParams::Manipulate { offset, replacement_hex } => match hex::decode(replacement_hex) {
                Ok(b) if !b.is_empty() => {
                    if let Some(t) = targets.iter().find(|t| offset + b.len() > t.frame_size as usize - FCS_LEN) {
                        err(
                            &mut r,
                            format!("{path}.params"),
                            format!("anomaly {}: replacement overruns the {}-byte frames of {}", a.id, t.frame_size, t.id),
                        );
                    }
                }
                _ => err(&mut r, format!("{path}.params.replacement_hex"), format!("anomaly {}: replacement must be non-empty hex", a.id)),
            },
            AnomalyParams::Reorder { displacement } if *displacement == 0 => {
                err(&mut r, format!("{path}.params.displacement"), format!("anomaly {}: displacement must be at least 1", a.id))
            }
            _ => {}
        }
    }

    for (i, c) in cfg.capture_points.iter().enumerate() {
        let path = format!("capture_points[{i}]");
        if !kinds.contains_key(c.node.as_str()) {
            err(&mut r, format!("{path}.node"), format!("capture node {:?} does not exist", c.node));
        } else if !port_linked(&c.node, &c.port) {
            err(&mut r, format!("{path}.port"), format!("capture port {}.{} is not linked", c.node, c.port));
        }
        for sid in c.streams.iter().flatten() {
            if !declared.contains(sid.as_str()) {
                err(&mut r, format!("{path}.streams"), format!("capture filter names unknown stream {sid:?}"));
            }
        }
    }

    if r.errors.is_empty() {
        if let Err(issues) = crate::sim::build_plan(cfg) {
            r.errors.extend(issues);
        }
    }
    r
}
