//! The event loop.
//!
//! Events are ordered by true time, then node index, then insertion order.
//! Frames move by value through the events; their bytes are only encoded
//! when a capture point records them.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeMap, HashMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::cbs::CreditState;
use super::clock::ClockModel;
use super::frame::FrameTemplate;
use super::frer::{frer_accept, RecoveryState};
use super::plan::{build_plan, Plan};
use super::stats::{CaptureCount, ConservationRow, ListenerStats, SourceStats, StatsReport, TxRecord};
use super::tas::tas_gate_transmit_time;
use super::{stream_matches, SimError};
use crate::anomaly::{
    phase_label_at, AnomalyLedger, AnomalyParams, AnomalyTarget, EgressStage, Emit, LabelPair, PacketLabel,
    StageStats,
};
use crate::dataset::{CapturePoint, CaptureSet, InterfaceMeta, LabeledPacket};
use crate::net::{tx_duration_ns, WIRE_OVERHEAD};
use crate::rng::{site_key, site_rng};
use crate::scenario::{validate_scenario, Cycle, ScenarioConfig};
use crate::Nanos;

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Record every transmission (for shaper conformance checks).
    pub trace_tx: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SimOutput {
    pub captures: CaptureSet,
    pub stats: StatsReport,
    pub ledger: AnomalyLedger,
    pub conservation: Vec<ConservationRow>,
    /// Per anomaly id.
    pub anomalies: Vec<(String, StageStats)>,
    /// Empty unless [`SimOptions::trace_tx`] is set.
    pub tx_trace: Vec<TxRecord>,
    pub events: u64,
}

#[derive(Debug, Clone)]
struct Frame {
    stream: u32,
    seq: u64,
    /// Redundancy member the copy travels as.
    member: u8,
    created: Nanos,
    label: PacketLabel,
    patches: Option<Box<Vec<(usize, Vec<u8>)>>>,
}

impl AnomalyTarget for Frame {
    fn stream(&self) -> u32 {
        self.stream
    }

    fn seq(&self) -> u64 {
        self.seq
    }

    fn label(&self) -> PacketLabel {
        self.label
    }

    fn set_label(&mut self, l: PacketLabel) {
        self.label = l;
    }

    fn manipulate(&mut self, offset: usize, bytes: &[u8]) {
        self.patches.get_or_insert_with(Default::default).push((offset, bytes.to_vec()));
    }
}

enum Ev {
    Gen { stream: u32, local: i64 },
    Arrive { port: u32, frame: Frame },
    Enqueue { port: u32, frame: Frame, bypass: bool },
    TxDone { port: u32 },
    Wake { port: u32 },
    Inject { anomaly: u32, k: u64 },
    Flush,
}

struct Entry {
    time: Nanos,
    node: u32,
    seq: u64,
    ev: Ev,
}

impl Entry {
    fn key(&self) -> (Nanos, u32, u64) {
        (self.time, self.node, self.seq)
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed: the heap pops the smallest key first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Default)]
struct PortState {
    queues: [VecDeque<Frame>; 8],
    busy_until: Nanos,
    credit: [Option<CreditState>; 8],
    wake_at: Option<Nanos>,
    stage: Option<EgressStage<Frame>>,
}

struct Capture {
    point: CapturePoint,
    streams: Vec<bool>,
    last_ts: Nanos,
}

struct InjectSite {
    node: usize,
    port: usize,
    slot: usize,
    stream: usize,
    start: Nanos,
    period: Nanos,
    payload: Option<Vec<u8>>,
}

#[derive(Default, Clone, Copy)]
struct Counters {
    injected: u64,
    duplicates: u64,
    eliminated: u64,
    dropped: u64,
}

#[derive(Clone, Copy)]
enum Bucket {
    Injected,
    Eliminated,
    Dropped,
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    plan: &'a Plan,
    trace_tx: bool,
    now: Nanos,
    heap: BinaryHeap<Entry>,
    ev_seq: u64,
    events: u64,
    gen_end: Nanos,
    end: Nanos,
    clocks: Vec<ClockModel>,
    ports: Vec<Vec<PortState>>,
    templates: Vec<FrameTemplate>,
    cycle_rngs: Vec<ChaCha8Rng>,
    next_seq: Vec<u64>,
    names: Vec<String>,
    sources: Vec<SourceStats>,
    listeners: Vec<ListenerStats>,
    counters: Vec<Counters>,
    listener_index: HashMap<(usize, usize), usize>,
    frer: HashMap<(usize, usize), RecoveryState>,
    captures: Vec<Capture>,
    cap_in: Vec<Vec<Option<usize>>>,
    cap_out: Vec<Vec<Option<usize>>>,
    injects: Vec<Option<InjectSite>>,
    ledger: AnomalyLedger,
    queue_drops: u64,
    tx_trace: Vec<TxRecord>,
}

/// Runs a scenario to completion.
///
/// Sources stop at `duration_ns`; frames still travelling then get
/// `topology.drain_ns` more to arrive. Anything left afterwards counts as in
/// flight.
pub fn run_simulation(cfg: &ScenarioConfig, opts: &SimOptions) -> Result<SimOutput, SimError> {
    let report = validate_scenario(cfg);
    if !report.is_ok() {
        return Err(SimError::Invalid(report.errors));
    }
    let plan = build_plan(cfg).map_err(SimError::Invalid)?;
    let mut e = Engine::new(cfg, &plan, opts);
    e.start();
    e.run()?;
    Ok(e.finish())
}

fn draw_cycle(c: &Cycle, rng: &mut ChaCha8Rng) -> Nanos {
    match *c {
        Cycle::Fixed(p) => p,
        Cycle::Uniform([lo, hi]) => rng.gen_range(lo..=hi),
        Cycle::Exponential(mean) => {
            let u: f64 = rng.gen();
            (-(1.0 - u).ln() * mean as f64).round().max(1.0) as Nanos
        }
    }
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig, plan: &'a Plan, opts: &SimOptions) -> Self {
        let net = &plan.net;
        let seed = cfg.seed;
        let cc = &cfg.topology.clock;
        let clocks = net
            .nodes
            .iter()
            .map(|n| {
                if cc.master.as_deref() == Some(n.name.as_str()) {
                    return ClockModel::perfect();
                }
                let ppb = (cc.drift_ppm * 1000.0).round() as i64;
                let mut r = site_rng(seed, &format!("clock.{}", n.name));
                ClockModel {
                    drift_ppb: if ppb == 0 { 0 } else { r.gen_range(-ppb..=ppb) },
                    sync_interval_ns: cc.sync_interval_ns.max(1),
                    post_sync_offset_bound_ns: cc.post_sync_offset_bound_ns,
                    key: site_key(seed, &format!("clock.{}.offset", n.name)),
                }
            })
            .collect();
        let mut ports: Vec<Vec<PortState>> =
            net.nodes.iter().map(|n| n.ports.iter().map(|_| PortState::default()).collect()).collect();
        for (n, node) in net.nodes.iter().enumerate() {
            for (p, info) in node.ports.iter().enumerate() {
                for pcp in 0..8 {
                    let idle = plan.idle_slopes[n][p][pcp];
                    if idle > 0 {
                        ports[n][p].credit[pcp] = Some(CreditState::new(idle, info.rate_bps));
                    }
                }
            }
        }

        let streams = &plan.streams;
        let mut listeners = Vec::new();
        let mut listener_index = HashMap::new();
        for (s, st) in streams.iter().enumerate() {
            for d in &st.destinations {
                let node = net.node_index(d).expect("resolved listener");
                listener_index.insert((s, node), listeners.len());
                listeners.push(ListenerStats {
                    stream: st.id.clone(),
                    listener: d.clone(),
                    hops: plan.routes[s].hops.get(&node).copied().unwrap_or(0),
                    ..Default::default()
                });
            }
        }

        let mut captures: Vec<Capture> = Vec::new();
        let mut cap_in: Vec<Vec<Option<usize>>> = net.nodes.iter().map(|n| vec![None; n.ports.len()]).collect();
        let mut cap_out = cap_in.clone();
        for c in &cfg.capture_points {
            let Some(n) = net.node_index(&c.node) else { continue };
            let Some(p) = net.port_index(n, &c.port) else { continue };
            let filter: Vec<bool> = streams
                .iter()
                .map(|s| match &c.streams {
                    None => true,
                    Some(ids) => ids.iter().any(|i| *i == s.id || *i == cfg.streams[s.spec_index].id),
                })
                .collect();
            for &dir in c.direction.directions() {
                let slot = match dir {
                    crate::net::Direction::In => &mut cap_in[n][p],
                    crate::net::Direction::Out => &mut cap_out[n][p],
                };
                if slot.is_some() {
                    continue;
                }
                *slot = Some(captures.len());
                let meta = InterfaceMeta::new(&c.node, &c.port, dir, net.port(n, p).rate_bps);
                captures.push(Capture { point: CapturePoint::new(meta), streams: filter.clone(), last_ts: 0 });
            }
        }

        let gen_end = cfg.duration_ns;
        let mut injects = Vec::new();
        for a in &cfg.anomalies {
            let n = net.node_index(&a.location.node).expect("validated location");
            let p = net.port_index(n, &a.location.port).expect("validated location");
            let matches: Vec<bool> = streams.iter().map(|s| stream_matches(&a.target_filter, s)).collect();
            let stage = ports[n][p].stage.get_or_insert_with(|| EgressStage::new(net.iface_name(n, p)));
            let slot = stage.add(a.clone(), matches.clone(), site_rng(seed, &format!("anomaly.{}", a.id)));
            injects.push(match &a.params {
                AnomalyParams::Inject { period_ns, payload_hex } => Some(InjectSite {
                    node: n,
                    port: p,
                    slot,
                    stream: matches.iter().position(|&m| m).expect("validated template"),
                    start: a.phase.start_ns,
                    period: *period_ns,
                    payload: payload_hex.as_deref().map(|h| hex::decode(h).expect("validated hex")),
                }),
                _ => None,
            });
        }

        Engine {
            cfg,
            plan,
            trace_tx: opts.trace_tx,
            now: 0,
            heap: BinaryHeap::new(),
            ev_seq: 0,
            events: 0,
            gen_end,
            end: gen_end + cfg.topology.drain_ns,
            clocks,
            ports,
            templates: streams.iter().map(FrameTemplate::new).collect(),
            cycle_rngs: streams.iter().map(|s| site_rng(seed, &format!("cycle.{}", s.id))).collect(),
            next_seq: vec![0; streams.len()],
            names: streams.iter().map(|s| s.id.clone()).collect(),
            sources: streams.iter().map(|s| SourceStats { stream: s.id.clone(), ..Default::default() }).collect(),
            listeners,
            counters: vec![Counters::default(); listener_index.len()],
            listener_index,
            frer: HashMap::new(),
            captures,
            cap_in,
            cap_out,
            injects,
            ledger: AnomalyLedger::default(),
            queue_drops: 0,
            tx_trace: Vec::new(),
        }
    }

    fn push(&mut self, time: Nanos, node: usize, ev: Ev) {
        self.ev_seq += 1;
        self.heap.push(Entry { time, node: node as u32, seq: self.ev_seq, ev });
    }

    fn local(&self, node: usize, t: Nanos) -> Nanos {
        self.clocks[node].local_time(t).max(0) as Nanos
    }

    fn start(&mut self) {
        for (s, st) in self.plan.streams.iter().enumerate() {
            let src = self.plan.routes[s].source;
            let local = st.start_offset_ns as i64;
            let t = self.clocks[src].true_time_at(0, local);
            if t < self.gen_end {
                self.push(t, src, Ev::Gen { stream: s as u32, local });
            }
        }
        for a in 0..self.injects.len() {
            if let Some(k) = self.next_inject_slot(a, 0) {
                let site = self.injects[a].as_ref().expect("inject site");
                let (t, n) = (site.start + k * site.period, site.node);
                self.push(t, n, Ev::Inject { anomaly: a as u32, k });
            }
        }
        self.push(self.gen_end, 0, Ev::Flush);
    }

    /// First grid index `>= k` whose instant is inside an active phase and
    /// before the end of generation.
    fn next_inject_slot(&self, a: usize, mut k: u64) -> Option<u64> {
        let site = self.injects[a].as_ref()?;
        let phase = &self.cfg.anomalies[a].phase;
        loop {
            let t = site.start + k * site.period;
            if t >= self.gen_end {
                return None;
            }
            if phase.is_active(t) {
                return Some(k);
            }
            k += 1;
        }
    }

    fn run(&mut self) -> Result<(), SimError> {
        while let Some(e) = self.heap.pop() {
            if e.time > self.end {
                self.heap.push(e);
                break;
            }
            self.now = e.time;
            self.events += 1;
            let node = e.node as usize;
            match e.ev {
                Ev::Gen { stream, local } => self.generate(stream as usize, local)?,
                Ev::Arrive { port, frame } => self.arrive(node, port as usize, frame),
                Ev::Enqueue { port, frame, bypass } => self.enqueue(node, port as usize, frame, bypass)?,
                Ev::TxDone { port } => self.try_start(node, port as usize)?,
                Ev::Wake { port } => {
                    let ps = &mut self.ports[node][port as usize];
                    if ps.wake_at == Some(self.now) {
                        ps.wake_at = None;
                    }
                    self.try_start(node, port as usize)?;
                }
                Ev::Inject { anomaly, k } => self.inject(anomaly as usize, k)?,
                Ev::Flush => self.flush()?,
            }
        }
        Ok(())
    }

    fn generate(&mut self, s: usize, local: i64) -> Result<(), SimError> {
        let seq = self.next_seq[s];
        self.next_seq[s] += 1;
        self.sources[s].record(local.max(0) as Nanos);
        let frame =
            Frame { stream: s as u32, seq, member: 0, created: self.now, label: PacketLabel::Benign, patches: None };
        let plan = self.plan;
        let src = plan.routes[s].source;
        for route in plan.routes[s].routes(src, 0) {
            let mut f = frame.clone();
            f.member = route.member_out;
            self.enqueue(src, route.port, f, false)?;
        }
        let next = local + draw_cycle(&plan.streams[s].cycle, &mut self.cycle_rngs[s]) as i64;
        let t = self.clocks[src].true_time_at(self.now, next);
        if t < self.gen_end {
            self.push(t, src, Ev::Gen { stream: s as u32, local: next });
        }
        Ok(())
    }

    fn capture(&mut self, idx: usize, node: usize, f: &Frame) {
        if !self.captures[idx].streams[f.stream as usize] {
            return;
        }
        let local = self.local(node, self.now);
        let phase = phase_label_at(&self.cfg.anomalies, self.now);
        let bytes = self.templates[f.stream as usize].encode(f.seq, f.patches.as_deref().map_or(&[], |p| p.as_slice()));
        let c = &mut self.captures[idx];
        let ts = local.max(c.last_ts);
        c.last_ts = ts;
        c.point.packets.push(LabeledPacket { ts, frame: bytes, labels: LabelPair::new(f.label, phase) });
    }

    fn arrive(&mut self, node: usize, port: usize, frame: Frame) {
        if let Some(ci) = self.cap_in[node][port] {
            self.capture(ci, node, &frame);
        }
        let plan = self.plan;
        let s = frame.stream as usize;
        let r = &plan.routes[s];
        if r.deliver[node] {
            self.deliver(s, node, &frame);
        }
        let delay = self.cfg.topology.switching.processing_delay_ns;
        for route in r.routes(node, frame.member) {
            if route.recover {
                let listener = plan.net.port(node, route.port).peer_node;
                if !self.frer_check(s, listener, frame.seq) {
                    continue;
                }
            }
            let mut f = frame.clone();
            f.member = route.member_out;
            self.push(self.now + delay, node, Ev::Enqueue { port: route.port as u32, frame: f, bypass: false });
        }
    }

    /// FRER check for `(stream, listener)`; a rejected copy is counted as
    /// an eliminated duplicate.
    fn frer_check(&mut self, s: usize, listener: usize, seq: u64) -> bool {
        let h = self.cfg.topology.frer.history_length;
        let st = self.frer.entry((s, listener)).or_insert_with(|| RecoveryState::new(h));
        if frer_accept(st, seq) {
            return true;
        }
        if let Some(&i) = self.listener_index.get(&(s, listener)) {
            self.counters[i].duplicates += 1;
            self.listeners[i].duplicates_eliminated += 1;
        }
        false
    }

    fn deliver(&mut self, s: usize, node: usize, f: &Frame) {
        let r = &self.plan.routes[s];
        if self.plan.streams[s].redundant && r.recover_at_listener && !self.frer_check(s, node, f.seq) {
            return;
        }
        let i = self.listener_index[&(s, node)];
        self.listeners[i].record(self.now - f.created);
    }

    fn account(&mut self, node: usize, port: usize, f: &Frame, bucket: Bucket) {
        let s = f.stream as usize;
        for (l, c) in self.plan.copies_via(s, node, port, f.member) {
            if let Some(&i) = self.listener_index.get(&(s, l)) {
                let ctr = &mut self.counters[i];
                let field = match bucket {
                    Bucket::Injected => &mut ctr.injected,
                    Bucket::Eliminated => &mut ctr.eliminated,
                    Bucket::Dropped => &mut ctr.dropped,
                };
                *field += u64::from(c);
            }
        }
    }

    fn enqueue(&mut self, node: usize, port: usize, frame: Frame, bypass: bool) -> Result<(), SimError> {
        let emits = match (&mut self.ports[node][port].stage, bypass) {
            (Some(stage), false) => {
                let names = &self.names;
                stage.process(self.now, frame, &mut self.ledger, &|s| names[s as usize].clone())
            }
            _ => vec![Emit::Now(frame)],
        };
        for e in emits {
            match e {
                Emit::Now(f) => self.push_queue(node, port, f),
                Emit::At(t, f) => self.push(t, node, Ev::Enqueue { port: port as u32, frame: f, bypass: true }),
                Emit::Dropped(f) => self.account(node, port, &f, Bucket::Eliminated),
            }
        }
        self.try_start(node, port)
    }

    fn push_queue(&mut self, node: usize, port: usize, f: Frame) {
        let pcp = usize::from(self.plan.streams[f.stream as usize].pcp);
        if self.ports[node][port].queues[pcp].len() >= self.cfg.topology.switching.queue_capacity {
            self.queue_drops += 1;
            self.account(node, port, &f, Bucket::Dropped);
            return;
        }
        self.update_credit(node, port, pcp);
        self.ports[node][port].queues[pcp].push_back(f);
    }

    /// Brings the credit of one class up to now. Credit only moves while the
    /// class gate is open.
    fn update_credit(&mut self, node: usize, port: usize, pcp: usize) {
        let now = self.now;
        let Some(last) = self.ports[node][port].credit[pcp].map(|c| c.last_update) else { return };
        if now <= last {
            return;
        }
        let open = match &self.plan.gates[node][port] {
            Some(g) if g.is_gated(pcp as u8) => {
                g.open_time_between(pcp as u8, self.local(node, last), self.local(node, now))
            }
            _ => now - last,
        };
        let ps = &mut self.ports[node][port];
        let waiting = !ps.queues[pcp].is_empty();
        if let Some(c) = ps.credit[pcp].as_mut() {
            c.advance(now, open, waiting);
        }
    }

    fn try_start(&mut self, node: usize, port: usize) -> Result<(), SimError> {
        let now = self.now;
        if self.ports[node][port].busy_until > now {
            return Ok(());
        }
        let rate = self.plan.net.port(node, port).rate_bps;
        let mut earliest: Option<Nanos> = None;
        for pcp in (0..8usize).rev() {
            let Some(front) = self.ports[node][port].queues[pcp].front() else { continue };
            let s = front.stream as usize;
            let tx = tx_duration_ns(self.templates[s].len(), rate);
            let mut ready = now;
            if let Some(g) = &self.plan.gates[node][port] {
                if g.is_gated(pcp as u8) {
                    let lnow = self.local(node, now);
                    let ls = tas_gate_transmit_time(g, pcp as u8, lnow, tx).map_err(|e| SimError::Unschedulable {
                        stream: self.names[s].clone(),
                        iface: self.plan.net.iface_name(node, port),
                        source: e,
                    })?;
                    if ls > lnow {
                        ready = self.clocks[node].true_time_at(now, ls as i64).max(now + 1);
                    }
                }
            }
            if ready == now {
                self.update_credit(node, port, pcp);
                if let Some(c) = &self.ports[node][port].credit[pcp] {
                    let w = c.wait_ns();
                    if w > 0 {
                        ready = now + w;
                    }
                }
            }
            if ready == now {
                self.transmit(node, port, pcp, tx);
                return Ok(());
            }
            earliest = Some(earliest.map_or(ready, |e| e.min(ready)));
        }
        if let Some(t) = earliest {
            let ps = &mut self.ports[node][port];
            if ps.wake_at.is_none_or(|w| w > t || w < now) {
                ps.wake_at = Some(t);
                self.push(t, node, Ev::Wake { port: port as u32 });
            }
        }
        Ok(())
    }

    fn transmit(&mut self, node: usize, port: usize, pcp: usize, tx: Nanos) {
        let now = self.now;
        let local_start = self.clocks[node].local_time(now);
        let ps = &mut self.ports[node][port];
        let frame = ps.queues[pcp].pop_front().expect("front checked");
        if let Some(c) = ps.credit[pcp].as_mut() {
            c.start_tx(now, tx);
        }
        ps.busy_until = now + tx;
        if self.trace_tx {
            self.tx_trace.push(TxRecord {
                node: node as u32,
                port: port as u32,
                stream: frame.stream,
                pcp: pcp as u8,
                start: now,
                end: now + tx,
                local_start,
                bits: ((self.templates[frame.stream as usize].len() + WIRE_OVERHEAD) * 8) as u64,
            });
        }
        if let Some(ci) = self.cap_out[node][port] {
            self.capture(ci, node, &frame);
        }
        let info = self.plan.net.port(node, port);
        let (peer, peer_port, prop) = (info.peer_node, info.peer_port, info.prop_ns);
        self.push(now + tx, node, Ev::TxDone { port: port as u32 });
        self.push(now + tx + prop, peer, Ev::Arrive { port: peer_port as u32, frame });
    }

    fn inject(&mut self, a: usize, k: u64) -> Result<(), SimError> {
        let site = self.injects[a].as_ref().expect("inject site");
        let (node, port, slot, s) = (site.node, site.port, site.slot, site.stream);
        let seq = self.next_seq[s].saturating_sub(1);
        let name = self.names[s].clone();
        let payload = site.payload.clone();
        let stage = self.ports[node][port].stage.as_mut().expect("stage exists");
        if stage.decide_inject(slot, self.now, s as u32, seq, &mut self.ledger, name) {
            let patches = payload.map(|p| Box::new(vec![(self.templates[s].payload_offset(), p)]));
            let frame = Frame {
                stream: s as u32,
                seq,
                member: self.plan.member_on(s, node, port).unwrap_or(0),
                created: self.now,
                label: PacketLabel::Injected,
                patches,
            };
            self.account(node, port, &frame, Bucket::Injected);
            self.push_queue(node, port, frame);
            self.try_start(node, port)?;
        }
        if let Some(k) = self.next_inject_slot(a, k + 1) {
            let site = self.injects[a].as_ref().expect("inject site");
            let t = site.start + k * site.period;
            self.push(t, node, Ev::Inject { anomaly: a as u32, k });
        }
        Ok(())
    }

    /// End of generation: frames still held for reordering go out.
    fn flush(&mut self) -> Result<(), SimError> {
        for n in 0..self.ports.len() {
            for p in 0..self.ports[n].len() {
                let held = match self.ports[n][p].stage.as_mut() {
                    Some(stage) => stage.flush(),
                    None => continue,
                };
                if held.is_empty() {
                    continue;
                }
                for f in held {
                    self.push_queue(n, p, f);
                }
                self.try_start(n, p)?;
            }
        }
        Ok(())
    }

    fn in_flight(&self) -> BTreeMap<(usize, usize), u64> {
        let mut out: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let mut add = |s: usize, copies: BTreeMap<usize, u32>| {
            for (l, c) in copies {
                *out.entry((s, l)).or_default() += u64::from(c);
            }
        };
        for e in self.heap.iter() {
            let node = e.node as usize;
            match &e.ev {
                Ev::Arrive { frame, .. } => {
                    let mut m = BTreeMap::new();
                    self.plan.copies_from(frame.stream as usize, node, frame.member, &mut m);
                    add(frame.stream as usize, m);
                }
                Ev::Enqueue { port, frame, .. } => {
                    let s = frame.stream as usize;
                    add(s, self.plan.copies_via(s, node, *port as usize, frame.member));
                }
                _ => {}
            }
        }
        for (n, ports) in self.ports.iter().enumerate() {
            for (p, ps) in ports.iter().enumerate() {
                let held = ps.stage.iter().flat_map(|st| st.held());
                for f in ps.queues.iter().flatten().chain(held) {
                    let s = f.stream as usize;
                    add(s, self.plan.copies_via(s, n, p, f.member));
                }
            }
        }
        out
    }

    fn finish(self) -> SimOutput {
        let in_flight = self.in_flight();
        let mut conservation = Vec::new();
        let mut listeners = self.listeners;
        for (s, st) in self.plan.streams.iter().enumerate() {
            for d in &st.destinations {
                let node = self.plan.net.node_index(d).expect("resolved listener");
                let i = self.listener_index[&(s, node)];
                listeners[i].sent = self.next_seq[s];
                let c = self.counters[i];
                let copies = u64::from(self.plan.routes[s].copies.get(&node).copied().unwrap_or(0));
                conservation.push(ConservationRow {
                    stream: st.id.clone(),
                    listener: d.clone(),
                    generated: self.next_seq[s] * copies,
                    injected: c.injected,
                    delivered: listeners[i].received,
                    frer_duplicates: c.duplicates,
                    anomaly_eliminated: c.eliminated,
                    queue_dropped: c.dropped,
                    in_flight: in_flight.get(&(s, node)).copied().unwrap_or(0),
                });
            }
        }
        let mut anomalies = Vec::new();
        for a in &self.cfg.anomalies {
            let n = self.plan.net.node_index(&a.location.node).expect("validated");
            let p = self.plan.net.port_index(n, &a.location.port).expect("validated");
            let stage = self.ports[n][p].stage.as_ref().expect("stage exists");
            let slot = (0..stage.slot_count()).find(|&i| stage.config(i).id == a.id).expect("slot exists");
            anomalies.push((a.id.clone(), stage.stats(slot).clone()));
        }
        let captures = CaptureSet { points: self.captures.into_iter().map(|c| c.point).collect() };
        let stats = StatsReport {
            listeners,
            sources: self.sources,
            captures: captures
                .points
                .iter()
                .map(|p| CaptureCount { iface: p.meta.name.clone(), packets: p.packets.len() as u64 })
                .collect(),
            queue_drops: self.queue_drops,
        };
        log::debug!("simulation of {} finished after {} events", self.cfg.name, self.events);
        SimOutput {
            captures,
            stats,
            ledger: self.ledger,
            conservation,
            anomalies,
            tx_trace: self.tx_trace,
            events: self.events,
        }
    }
}
