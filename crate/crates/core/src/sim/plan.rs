//! Static network plan derived from a scenario: port graph, per-stream
//! forwarding, synthesized gate schedules and credit reservations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::tas::GateSchedule;
use crate::net::tx_duration_ns;
use crate::scenario::{
    resolve_streams, Cycle, Issue, NodeKind, RecoveryPoint, ResolvedStream, ScenarioConfig, ShapingClass,
};
use crate::Nanos;

#[derive(Debug, Clone)]
pub struct PortInfo {
    pub name: String,
    pub peer_node: usize,
    pub peer_port: usize,
    pub rate_bps: u64,
    pub prop_ns: Nanos,
}

#[derive(Debug, Clone)]
pub struct NodeInfo {
    pub name: String,
    pub kind: NodeKind,
    /// Linked ports in natural name order (`eth2` before `eth10`).
    pub ports: Vec<PortInfo>,
}

#[derive(Debug, Clone, Default)]
pub struct Net {
    pub nodes: Vec<NodeInfo>,
    index: HashMap<String, usize>,
}

impl Net {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn port_index(&self, node: usize, port: &str) -> Option<usize> {
        self.nodes[node].ports.iter().position(|p| p.name == port)
    }

    pub fn port(&self, node: usize, port: usize) -> &PortInfo {
        &self.nodes[node].ports[port]
    }

    pub fn iface_name(&self, node: usize, port: usize) -> String {
        format!("{}-{}", self.nodes[node].name, self.nodes[node].ports[port].name)
    }

    fn ring_ports(&self, node: usize) -> Vec<usize> {
        self.nodes[node]
            .ports
            .iter()
            .enumerate()
            .filter(|(_, p)| self.nodes[p.peer_node].kind == NodeKind::Switch)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Natural ordering of interface names: digit runs compare numerically.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn split(s: &str) -> (&str, Option<u64>) {
        let i = s.trim_end_matches(|c: char| c.is_ascii_digit()).len();
        (&s[..i], s[i..].parse().ok())
    }
    let (pa, na) = split(a);
    let (pb, nb) = split(b);
    pa.cmp(pb).then(na.cmp(&nb)).then(a.cmp(b))
}

/// One forwarding entry: a copy of member `member_in` arriving at the node
/// leaves on `port` as member `member_out`. Member 0 is the single path
/// (or the stretch before the ring split); redundant members are 1 and 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub member_in: u8,
    pub port: usize,
    pub member_out: u8,
    /// Eliminate duplicates here before the copy reaches its listener.
    pub recover: bool,
}

#[derive(Debug, Clone, Default)]
pub struct StreamRoutes {
    pub source: usize,
    pub per_node: Vec<Vec<Route>>,
    /// Listener flag per node.
    pub deliver: Vec<bool>,
    /// Duplicates are eliminated at listener arrival.
    pub recover_at_listener: bool,
    /// Switches traversed on the shortest member path, per listener.
    pub hops: BTreeMap<usize, u32>,
    /// Copies that reach each listener per generated frame.
    pub copies: BTreeMap<usize, u32>,
}

impl StreamRoutes {
    pub fn routes(&self, node: usize, member: u8) -> impl Iterator<Item = &Route> {
        self.per_node[node].iter().filter(move |r| r.member_in == member)
    }
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub net: Net,
    pub streams: Vec<ResolvedStream>,
    pub routes: Vec<StreamRoutes>,
    /// Gate schedule per node and port, if the port carries timed traffic.
    pub gates: Vec<Vec<Option<GateSchedule>>>,
    /// CBS idle slope per node, port and PCP; 0 where no shaper runs.
    pub idle_slopes: Vec<Vec<[u64; 8]>>,
}

impl Plan {
    /// Listener copies produced by one copy of `stream` arriving at `node`
    /// as `member`.
    pub fn copies_from(&self, stream: usize, node: usize, member: u8, out: &mut BTreeMap<usize, u32>) {
        let r = &self.routes[stream];
        if r.deliver[node] {
            *out.entry(node).or_default() += 1;
        }
        for route in r.routes(node, member) {
            let p = self.net.port(node, route.port);
            self.copies_from(stream, p.peer_node, route.member_out, out);
        }
    }

    /// Listener copies produced by a copy leaving `node` on `port`.
    pub fn copies_via(&self, stream: usize, node: usize, port: usize, member: u8) -> BTreeMap<usize, u32> {
        let mut out = BTreeMap::new();
        let p = self.net.port(node, port);
        self.copies_from(stream, p.peer_node, member, &mut out);
        out
    }

    /// Member a stream uses on `(node, port)`, if it crosses that port.
    pub fn member_on(&self, stream: usize, node: usize, port: usize) -> Option<u8> {
        self.routes[stream].per_node[node].iter().find(|r| r.port == port).map(|r| r.member_out)
    }
}

fn build_net(cfg: &ScenarioConfig, issues: &mut Vec<Issue>) -> Net {
    let mut net = Net::default();
    for n in &cfg.topology.nodes {
        net.index.insert(n.name.clone(), net.nodes.len());
        net.nodes.push(NodeInfo { name: n.name.clone(), kind: n.kind, ports: Vec::new() });
    }
    let mut raw: Vec<Vec<(String, usize, String, u64, Nanos)>> = vec![Vec::new(); net.nodes.len()];
    for (i, l) in cfg.topology.links.iter().enumerate() {
        let (Some(a), Some(b)) = (net.node_index(&l.a.node), net.node_index(&l.b.node)) else {
            issues.push(Issue::new(format!("topology.links[{i}]"), "link names an unknown node"));
            continue;
        };
        raw[a].push((l.a.port.clone(), b, l.b.port.clone(), l.rate_bps, l.propagation_delay_ns));
        raw[b].push((l.b.port.clone(), a, l.a.port.clone(), l.rate_bps, l.propagation_delay_ns));
    }
    for r in &mut raw {
        r.sort_by(|x, y| natural_cmp(&x.0, &y.0));
    }
    for (n, ports) in raw.iter().enumerate() {
        for (name, peer, peer_port, rate, prop) in ports {
            let pp = raw[*peer].iter().position(|q| &q.0 == peer_port).expect("link registered on both sides");
            net.nodes[n].ports.push(PortInfo {
                name: name.clone(),
                peer_node: *peer,
                peer_port: pp,
                rate_bps: *rate,
                prop_ns: *prop,
            });
        }
    }
    net
}

fn tree_routes(net: &Net, s: &ResolvedStream, src: usize, dests: &[usize]) -> Result<StreamRoutes, String> {
    let n = net.nodes.len();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut depth = vec![u32::MAX; n];
    let mut q = VecDeque::new();
    depth[src] = 0;
    q.push_back(src);
    while let Some(u) = q.pop_front() {
        if u != src && net.nodes[u].kind == NodeKind::Endpoint {
            continue;
        }
        for (pi, p) in net.nodes[u].ports.iter().enumerate() {
            let v = p.peer_node;
            if depth[v] == u32::MAX {
                depth[v] = depth[u] + u32::from(net.nodes[v].kind == NodeKind::Switch);
                parent[v] = Some((u, pi));
                q.push_back(v);
            }
        }
    }
    let mut r = StreamRoutes {
        source: src,
        per_node: vec![Vec::new(); n],
        deliver: vec![false; n],
        ..Default::default()
    };
    for &d in dests {
        if depth[d] == u32::MAX {
            return Err(format!("stream {}: listener {} is unreachable from {}", s.id, net.nodes[d].name, s.source));
        }
        r.deliver[d] = true;
        let mut hops = depth[d];
        if net.nodes[d].kind == NodeKind::Switch {
            // A switch listener is itself the last hop.
            hops = hops.max(1);
        }
        r.hops.insert(d, hops);
        let mut v = d;
        while let Some((u, pi)) = parent[v] {
            if !r.per_node[u].iter().any(|x| x.port == pi) {
                r.per_node[u].push(Route { member_in: 0, port: pi, member_out: 0, recover: false });
            }
            v = u;
        }
    }
    for list in &mut r.per_node {
        list.sort_by_key(|x| x.port);
    }
    Ok(r)
}

fn ring_routes(net: &Net, s: &ResolvedStream, src: usize, dests: &[usize]) -> Result<StreamRoutes, String> {
    let n = net.nodes.len();
    let mut r = StreamRoutes {
        source: src,
        per_node: vec![Vec::new(); n],
        deliver: vec![false; n],
        recover_at_listener: s.recovery == RecoveryPoint::Listener,
        ..Default::default()
    };
    let first = if net.nodes[src].kind == NodeKind::Switch {
        src
    } else {
        let p = net.nodes[src].ports.first().ok_or_else(|| format!("stream {}: source {} is not linked", s.id, s.source))?;
        r.per_node[src].push(Route { member_in: 0, port: 0, member_out: 0, recover: false });
        p.peer_node
    };
    if net.nodes[first].kind != NodeKind::Switch {
        return Err(format!("stream {}: redundant streams need the source attached to a switch", s.id));
    }
    // Listener -> (attachment switch, port on that switch towards it).
    let mut attach: Vec<(usize, usize, Option<usize>)> = Vec::new();
    for &d in dests {
        r.deliver[d] = true;
        if net.nodes[d].kind == NodeKind::Switch {
            attach.push((d, d, None));
        } else {
            let p = net.nodes[d].ports.first().ok_or_else(|| format!("stream {}: listener {} is not linked", s.id, net.nodes[d].name))?;
            attach.push((d, p.peer_node, Some(p.peer_port)));
        }
    }
    let deliver_local = |r: &mut StreamRoutes, sw: usize, member: u8, hops: u32, recover: bool| {
        for &(d, a, port) in &attach {
            if a != sw {
                continue;
            }
            if let Some(pi) = port {
                r.per_node[sw].push(Route { member_in: member, port: pi, member_out: member, recover });
            }
            let h = r.hops.entry(d).or_insert(hops);
            *h = (*h).min(hops);
        }
    };
    deliver_local(&mut r, first, 0, 1, false);
    let remote = attach.iter().any(|&(_, a, _)| a != first);
    if remote {
        let ring = net.ring_ports(first);
        if ring.len() != 2 {
            return Err(format!(
                "stream {}: redundant routing needs a ring, but switch {} has {} inter-switch ports",
                s.id,
                net.nodes[first].name,
                ring.len()
            ));
        }
        let recover = s.recovery == RecoveryPoint::LastSwitch;
        for (ri, &rp) in ring.iter().enumerate() {
            let member = ri as u8 + 1;
            // Walk the ring away from the first switch.
            let mut walk: Vec<(usize, Option<usize>)> = Vec::new();
            let (mut prev_node, mut prev_port) = (first, rp);
            loop {
                let p = net.port(prev_node, prev_port);
                let cur = p.peer_node;
                if cur == first {
                    break;
                }
                let rps = net.ring_ports(cur);
                if rps.len() != 2 {
                    return Err(format!(
                        "stream {}: redundant routing needs a ring, but switch {} has {} inter-switch ports",
                        s.id,
                        net.nodes[cur].name,
                        rps.len()
                    ));
                }
                let next = rps.into_iter().find(|&q| q != p.peer_port).expect("two ring ports");
                walk.push((cur, Some(next)));
                if walk.len() > net.nodes.len() {
                    return Err(format!("stream {}: ring walk does not return to {}", s.id, net.nodes[first].name));
                }
                prev_node = cur;
                prev_port = next;
            }
            let Some(last) = walk.iter().rposition(|&(sw, _)| attach.iter().any(|&(_, a, _)| a == sw)) else {
                continue;
            };
            walk.truncate(last + 1);
            r.per_node[first].push(Route { member_in: 0, port: rp, member_out: member, recover: false });
            for (i, &(sw, next)) in walk.iter().enumerate() {
                deliver_local(&mut r, sw, member, i as u32 + 2, recover);
                if i < last {
                    r.per_node[sw].push(Route { member_in: member, port: next.expect("inner hop"), member_out: member, recover: false });
                }
            }
        }
    }
    Ok(r)
}

fn mean_wire_rate(s: &ResolvedStream) -> f64 {
    let bits = ((s.frame_size as usize + crate::net::WIRE_OVERHEAD) * 8) as f64;
    bits * 1e9 / s.cycle.mean_ns()
}

/// Builds the plan or lists everything that prevents it.
pub fn build_plan(cfg: &ScenarioConfig) -> Result<Plan, Vec<Issue>> {
    let mut issues = Vec::new();
    let net = build_net(cfg, &mut issues);
    let (sp, mut res_issues) = resolve_streams(cfg);
    issues.append(&mut res_issues);
    let mut routes = Vec::new();
    for s in &sp.streams {
        let path = format!("streams[{}]", s.spec_index);
        let src = net.node_index(&s.source).expect("resolved source exists");
        let dests: Vec<usize> = s.destinations.iter().map(|d| net.node_index(d).expect("resolved")).collect();
        if net.nodes[src].kind == NodeKind::Endpoint && net.nodes[src].ports.is_empty() {
            issues.push(Issue::new(path, format!("stream {}: source {} is not linked", s.id, s.source)));
            routes.push(StreamRoutes::default());
            continue;
        }
        let r = if s.redundant { ring_routes(&net, s, src, &dests) } else { tree_routes(&net, s, src, &dests) };
        match r {
            Ok(r) => routes.push(r),
            Err(m) => {
                issues.push(Issue::new(path, m));
                routes.push(StreamRoutes::default());
            }
        }
    }
    if !issues.is_empty() {
        return Err(issues);
    }

    let mut plan = Plan {
        gates: net.nodes.iter().map(|n| vec![None; n.ports.len()]).collect(),
        idle_slopes: net.nodes.iter().map(|n| vec![[0u64; 8]; n.ports.len()]).collect(),
        net,
        streams: sp.streams,
        routes,
    };
    for i in 0..plan.streams.len() {
        let src = plan.routes[i].source;
        let mut copies = BTreeMap::new();
        let first = plan.routes[i].per_node[src].clone();
        for r in first.iter().filter(|r| r.member_in == 0) {
            let p = plan.net.port(src, r.port);
            plan.copies_from(i, p.peer_node, r.member_out, &mut copies);
        }
        plan.routes[i].copies = copies;
    }

    synthesize_gates(cfg, &mut plan, &mut issues);
    reserve_credit(cfg, &mut plan, &mut issues);
    if issues.is_empty() {
        Ok(plan)
    } else {
        Err(issues)
    }
}

/// Opens one window per timed frame and hop, `hop_offset` after the frame's
/// expected arrival; every other class is closed while a window is open.
fn synthesize_gates(cfg: &ScenarioConfig, plan: &mut Plan, issues: &mut Vec<Issue>) {
    let tas = &cfg.topology.tas;
    let timed: Vec<u8> = (0..8u8).filter(|&p| cfg.topology.class_of(p) == ShapingClass::Timed).collect();
    let mut windows: BTreeMap<(usize, usize), Vec<(Nanos, Nanos)>> = BTreeMap::new();
    let mut window_users: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    // Frames of one source sharing a send instant leave back to back.
    let mut queued_at_source: BTreeMap<(usize, Nanos), Nanos> = BTreeMap::new();
    for (i, s) in plan.streams.iter().enumerate() {
        if s.shaping_class != ShapingClass::Timed {
            continue;
        }
        let r = &plan.routes[i];
        let src = r.source;
        let send = match s.cycle {
            Cycle::Fixed(_) => s.start_offset_ns % tas.cycle_ns,
            _ => continue,
        };
        // (node, member, expected arrival in network time)
        let mut frontier: Vec<(usize, u8, Nanos)> = Vec::new();
        if plan.net.nodes[src].kind == NodeKind::Switch {
            frontier.push((src, 0, send));
        } else {
            for route in r.routes(src, 0) {
                let p = plan.net.port(src, route.port);
                let tx = tx_duration_ns(s.frame_size as usize, p.rate_bps);
                let busy = queued_at_source.entry((src, send)).or_insert(0);
                *busy += tx;
                frontier.push((p.peer_node, route.member_out, send + *busy + p.prop_ns));
            }
        }
        while let Some((node, member, arrival)) = frontier.pop() {
            if plan.net.nodes[node].kind != NodeKind::Switch {
                continue;
            }
            let open = arrival + tas.hop_offset_ns;
            for route in r.routes(node, member) {
                let p = plan.net.port(node, route.port);
                let tx = tx_duration_ns(s.frame_size as usize, p.rate_bps);
                windows.entry((node, route.port)).or_default().push((open % tas.cycle_ns, tas.window_ns));
                window_users.entry((node, route.port)).or_default().push(i);
                if tx > tas.window_ns {
                    issues.push(Issue::new(
                        format!("streams[{}]", s.spec_index),
                        format!(
                            "stream {}: a {tx} ns transmission does not fit the {} ns window on {}",
                            s.id,
                            tas.window_ns,
                            plan.net.iface_name(node, route.port)
                        ),
                    ));
                }
                frontier.push((p.peer_node, route.member_out, open + tx + p.prop_ns));
            }
        }
    }
    for ((node, port), ws) in windows {
        let mut g = GateSchedule::always_open(tas.cycle_ns);
        g.hop_offset_ns = tas.hop_offset_ns;
        let mut iv = Vec::new();
        for (start, len) in ws {
            let end = start + len;
            if end <= tas.cycle_ns {
                iv.push((start, end));
            } else {
                iv.push((start, tas.cycle_ns));
                iv.push((0, end - tas.cycle_ns));
            }
        }
        for &p in &timed {
            g.set_open(p, &iv).expect("windows lie within the cycle");
        }
        let closed = g.open_intervals(timed[0]).map(<[_]>::to_vec).unwrap_or_default();
        let mut complement = Vec::new();
        let mut at = 0;
        for (a, b) in closed {
            if a > at {
                complement.push((at, a));
            }
            at = b;
        }
        if at < tas.cycle_ns {
            complement.push((at, tas.cycle_ns));
        }
        for p in (0..8u8).filter(|p| !timed.contains(p)) {
            if complement.is_empty() {
                issues.push(Issue::new(
                    "topology.tas",
                    format!("timed windows cover the whole cycle on {}", plan.net.iface_name(node, port)),
                ));
                break;
            }
            g.set_open(p, &complement).expect("complement lies within the cycle");
        }
        plan.gates[node][port] = Some(g);
    }
    // Every other frame crossing a gated port must fit between windows.
    for (i, s) in plan.streams.iter().enumerate() {
        if s.shaping_class == ShapingClass::Timed {
            continue;
        }
        // Talkers send at line rate; shaping starts at the first switch.
        for (node, list) in plan.routes[i].per_node.iter().enumerate() {
            if plan.net.nodes[node].kind != NodeKind::Switch {
                continue;
            }
            for route in list {
                if let Some(g) = &plan.gates[node][route.port] {
                    let tx = tx_duration_ns(s.frame_size as usize, plan.net.port(node, route.port).rate_bps);
                    if g.longest_span(s.pcp).is_some_and(|l| l < tx) {
                        issues.push(Issue::new(
                            format!("streams[{}]", s.spec_index),
                            format!("stream {}: frames do not fit between timed windows on {}", s.id, plan.net.iface_name(node, route.port)),
                        ));
                    }
                }
            }
        }
    }
}

fn reserve_credit(cfg: &ScenarioConfig, plan: &mut Plan, issues: &mut Vec<Issue>) {
    let factor = cfg.topology.cbs.reserve_factor;
    let mut sums: BTreeMap<(usize, usize, u8), f64> = BTreeMap::new();
    for (i, s) in plan.streams.iter().enumerate() {
        if s.shaping_class != ShapingClass::Shaped {
            continue;
        }
        let rate = mean_wire_rate(s) * factor;
        // Members converging on one port after recovery still carry one copy.
        let mut ports = BTreeSet::new();
        // Talkers send at line rate; shaping starts at the first switch.
        for (node, list) in plan.routes[i].per_node.iter().enumerate() {
            if plan.net.nodes[node].kind != NodeKind::Switch {
                continue;
            }
            for route in list {
                ports.insert((node, route.port));
            }
        }
        for (node, port) in ports {
            *sums.entry((node, port, s.pcp)).or_default() += rate;
        }
    }
    for ((node, port, pcp), sum) in sums {
        let link = plan.net.port(node, port).rate_bps;
        let idle = sum.ceil() as u64;
        if idle >= link {
            issues.push(Issue::new(
                "topology.cbs",
                format!(
                    "PCP {pcp} reservation of {idle} bit/s on {} reaches the {link} bit/s link rate",
                    plan.net.iface_name(node, port)
                ),
            ));
        }
        plan.idle_slopes[node][port][usize::from(pcp)] = idle.max(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order() {
        let mut v = vec!["eth10", "eth2", "eth0", "eth1"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, vec!["eth0", "eth1", "eth2", "eth10"]);
    }
}
