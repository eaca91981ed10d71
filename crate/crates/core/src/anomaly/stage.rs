//! Per-port anomaly stage. The simulator pushes every frame bound for an
//! egress queue through here; the stage decides, labels and returns what to
//! enqueue and when.

use std::collections::{BTreeSet, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::{decide_action, AnomalyConfig, AnomalyLedger, AnomalyParams, LedgerEntry, PacketLabel};
use crate::Nanos;

/// Frame handle the stage can inspect and modify.
pub trait AnomalyTarget {
    fn stream(&self) -> u32;
    fn seq(&self) -> u64;
    fn label(&self) -> PacketLabel;
    fn set_label(&mut self, l: PacketLabel);
    /// Overwrites `bytes.len()` bytes at `offset`, keeping the frame length.
    fn manipulate(&mut self, offset: usize, bytes: &[u8]);
}

#[derive(Debug)]
pub enum Emit<P> {
    Now(P),
    At(Nanos, P),
    /// Eliminated; handed back only for accounting.
    Dropped(P),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageStats {
    /// Matching frames offered to the anomaly.
    pub matched: u64,
    pub acted: u64,
    /// Matching frames that left the stage (including delayed/held ones).
    pub forwarded: u64,
}

struct Slot<P> {
    cfg: AnomalyConfig,
    matches: Vec<bool>,
    rng: ChaCha8Rng,
    last_action: Option<Nanos>,
    held: VecDeque<(P, u32)>,
    stats: StageStats,
    replacement: Vec<u8>,
}

pub struct EgressStage<P> {
    slots: Vec<Slot<P>>,
    recovered_pending: BTreeSet<u32>,
    location: String,
}

impl<P: AnomalyTarget> EgressStage<P> {
    /// `matches[s]` says whether stream index `s` is targeted.
    pub fn new(location: String) -> Self {
        EgressStage { slots: Vec::new(), recovered_pending: BTreeSet::new(), location }
    }

    pub fn add(&mut self, cfg: AnomalyConfig, matches: Vec<bool>, rng: ChaCha8Rng) -> usize {
        let replacement = match &cfg.params {
            AnomalyParams::Manipulate { replacement_hex, .. } => hex::decode(replacement_hex).unwrap_or_default(),
            _ => Vec::new(),
        };
        self.slots.push(Slot {
            cfg,
            matches,
            rng,
            last_action: None,
            held: VecDeque::new(),
            stats: StageStats::default(),
            replacement,
        });
        self.slots.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn config(&self, slot: usize) -> &AnomalyConfig {
        &self.slots[slot].cfg
    }

    pub fn stats(&self, slot: usize) -> &StageStats {
        &self.slots[slot].stats
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    fn targets(&self, slot: usize, stream: u32) -> bool {
        self.slots[slot].matches.get(stream as usize).copied().unwrap_or(false)
    }

    /// Runs one frame through the stage at true time `t`.
    pub fn process(
        &mut self,
        t: Nanos,
        pkt: P,
        ledger: &mut AnomalyLedger,
        stream_name: &dyn Fn(u32) -> String,
    ) -> Vec<Emit<P>> {
        let s = pkt.stream();
        let mut out = Vec::new();

        // Held frames move one step closer to release for every later
        // matching frame; the ones reaching zero go out behind this frame.
        let mut released = Vec::new();
        for i in 0..self.slots.len() {
            if !self.targets(i, s) {
                continue;
            }
            let slot = &mut self.slots[i];
            for h in slot.held.iter_mut() {
                h.1 = h.1.saturating_sub(1);
            }
            while slot.held.front().is_some_and(|h| h.1 == 0) {
                released.push(slot.held.pop_front().expect("front checked").0);
            }
        }

        let mut pending = Some(pkt);
        for i in 0..self.slots.len() {
            if !self.targets(i, s) {
                continue;
            }
            let slot = &mut self.slots[i];
            slot.stats.matched += 1;
            let Some(mut pkt) = pending.take() else {
                continue;
            };
            let busy = matches!(slot.cfg.params, AnomalyParams::Reorder { .. }) && !slot.held.is_empty();
            let inject = matches!(slot.cfg.params, AnomalyParams::Inject { .. });
            if busy || inject || !decide_action(&slot.cfg, t, &mut slot.last_action, &mut slot.rng) {
                slot.stats.forwarded += 1;
                pending = Some(pkt);
                continue;
            }
            slot.stats.acted += 1;
            let mut entry = LedgerEntry {
                true_time_ns: t,
                anomaly_id: slot.cfg.id.clone(),
                kind: slot.cfg.kind,
                stream_id: stream_name(s),
                seq: pkt.seq(),
                detail: String::new(),
            };
            match &slot.cfg.params {
                AnomalyParams::Delay { amount_ns } => {
                    pkt.set_label(PacketLabel::Delayed);
                    entry.detail = format!("delayed {amount_ns} ns at {}", self.location);
                    slot.stats.forwarded += 1;
                    out.push(Emit::At(t + amount_ns, pkt));
                }
                AnomalyParams::Eliminate {} => {
                    entry.detail = format!("dropped at {}", self.location);
                    out.push(Emit::Dropped(pkt));
                }
                AnomalyParams::Manipulate { offset, .. } => {
                    pkt.manipulate(*offset, &slot.replacement);
                    pkt.set_label(PacketLabel::Manipulated);
                    entry.detail = format!("{} bytes replaced at offset {offset}", slot.replacement.len());
                    slot.stats.forwarded += 1;
                    out.push(Emit::Now(pkt));
                }
                AnomalyParams::Reorder { displacement } => {
                    pkt.set_label(PacketLabel::Reordered);
                    entry.detail = format!("held behind {displacement} packet(s) at {}", self.location);
                    slot.stats.forwarded += 1;
                    slot.held.push_back((pkt, (*displacement).max(1)));
                }
                AnomalyParams::Inject { .. } => unreachable!("injection never acts per packet"),
            }
            ledger.push(entry);
            self.recovered_pending.insert(s);
        }
        if let Some(mut pkt) = pending {
            if pkt.label() == PacketLabel::Benign && self.recovered_pending.remove(&s) {
                pkt.set_label(PacketLabel::BenignRecovered);
            }
            out.push(Emit::Now(pkt));
        }
        out.extend(released.into_iter().map(Emit::Now));
        out
    }

    /// Decides one injection slot of `slot` at `t` for template stream
    /// `stream`. On success the caller builds and enqueues the frame.
    pub fn decide_inject(&mut self, slot: usize, t: Nanos, stream: u32, seq: u64, ledger: &mut AnomalyLedger, stream_name: String) -> bool {
        let sl = &mut self.slots[slot];
        if !decide_action(&sl.cfg, t, &mut sl.last_action, &mut sl.rng) {
            return false;
        }
        sl.stats.acted += 1;
        ledger.push(LedgerEntry {
            true_time_ns: t,
            anomaly_id: sl.cfg.id.clone(),
            kind: sl.cfg.kind,
            stream_id: stream_name,
            seq,
            detail: format!("injected at {}", self.location),
        });
        self.recovered_pending.insert(stream);
        true
    }

    /// Releases frames still held for reordering (end of traffic).
    pub fn flush(&mut self) -> Vec<P> {
        let mut out = Vec::new();
        for slot in &mut self.slots {
            out.extend(slot.held.drain(..).map(|h| h.0));
        }
        out
    }

    pub fn held(&self) -> impl Iterator<Item = &P> {
        self.slots.iter().flat_map(|s| s.held.iter().map(|h| &h.0))
    }
}
