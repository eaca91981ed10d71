//! Run statistics and their delimited-text form.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::Nanos;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListenerStats {
    pub stream: String,
    pub listener: String,
    pub sent: u64,
    pub received: u64,
    pub min_latency_ns: Option<Nanos>,
    pub max_latency_ns: Option<Nanos>,
    /// Switches on the shortest path.
    pub hops: u32,
    pub duplicates_eliminated: u64,
}

impl ListenerStats {
    pub fn jitter_ns(&self) -> Option<Nanos> {
        Some(self.max_latency_ns? - self.min_latency_ns?)
    }

    pub(crate) fn record(&mut self, latency: Nanos) {
        self.received += 1;
        self.min_latency_ns = Some(self.min_latency_ns.map_or(latency, |m| m.min(latency)));
        self.max_latency_ns = Some(self.max_latency_ns.map_or(latency, |m| m.max(latency)));
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub stream: String,
    pub generated: u64,
    pub first_ns: Option<Nanos>,
    pub last_ns: Option<Nanos>,
    /// Smallest gap between consecutive generations.
    pub min_interval_ns: Option<Nanos>,
}

impl SourceStats {
    pub fn mean_interval_ns(&self) -> Option<f64> {
        if self.generated < 2 {
            return None;
        }
        Some((self.last_ns? - self.first_ns?) as f64 / (self.generated - 1) as f64)
    }

    pub(crate) fn record(&mut self, t: Nanos) {
        if let Some(last) = self.last_ns {
            let gap = t - last;
            self.min_interval_ns = Some(self.min_interval_ns.map_or(gap, |m| m.min(gap)));
        }
        self.first_ns.get_or_insert(t);
        self.last_ns = Some(t);
        self.generated += 1;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureCount {
    pub iface: String,
    pub packets: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub listeners: Vec<ListenerStats>,
    pub sources: Vec<SourceStats>,
    pub captures: Vec<CaptureCount>,
    /// Frames lost to full queues, over all ports.
    pub queue_drops: u64,
}

pub const STATS_HEADER: &str = "stream,listener,sent,received,min_latency_ns,max_latency_ns,jitter_ns";

fn opt(v: Option<Nanos>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl StatsReport {
    pub fn listener(&self, stream: &str, listener: &str) -> Option<&ListenerStats> {
        self.listeners.iter().find(|l| l.stream == stream && l.listener == listener)
    }

    pub fn stream_listeners<'a>(&'a self, stream: &'a str) -> impl Iterator<Item = &'a ListenerStats> + 'a {
        self.listeners.iter().filter(move |l| l.stream == stream)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{STATS_HEADER}")?;
        for l in &self.listeners {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                l.stream,
                l.listener,
                l.sent,
                l.received,
                opt(l.min_latency_ns),
                opt(l.max_latency_ns),
                opt(l.jitter_ns())
            )?;
        }
        Ok(())
    }

    /// Generation counts and intervals per resolved stream.
    pub fn write_sources_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "stream,generated,min_interval_ns,mean_interval_ns")?;
        for s in &self.sources {
            let mean = s.mean_interval_ns().map(|m| format!("{m:.1}")).unwrap_or_default();
            writeln!(w, "{},{},{},{mean}", s.stream, s.generated, opt(s.min_interval_ns))?;
        }
        Ok(())
    }

    /// Per-capture-point packet counts.
    pub fn write_capture_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "iface,packets")?;
        for c in &self.captures {
            writeln!(w, "{},{}", c.iface, c.packets)?;
        }
        Ok(())
    }
}

/// Copy balance of one (stream, listener) pair at the end of a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationRow {
    pub stream: String,
    pub listener: String,
    /// Copies expected from generated frames.
    pub generated: u64,
    /// Copies expected from injected frames.
    pub injected: u64,
    pub delivered: u64,
    pub frer_duplicates: u64,
    pub anomaly_eliminated: u64,
    pub queue_dropped: u64,
    pub in_flight: u64,
}

impl ConservationRow {
    pub fn balanced(&self) -> bool {
        self.delivered + self.frer_duplicates + self.anomaly_eliminated + self.queue_dropped + self.in_flight
            == self.generated + self.injected
    }
}

/// One transmission on a port, for shaper conformance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub node: u32,
    pub port: u32,
    pub stream: u32,
    pub pcp: u8,
    pub start: Nanos,
    pub end: Nanos,
    /// Start in the transmitting node's local clock.
    pub local_start: i64,
    /// Wire bits including preamble and inter-frame gap.
    pub bits: u64,
}
