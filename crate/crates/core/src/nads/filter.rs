//! Stream filters over captured frames.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CapturePoint, CaptureSet, LabeledPacket};
use crate::net::{stream_dmac, Direction, HeaderView, MacAddr};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("a stream filter needs at least one criterion")]
    Empty,
    #[error("malformed filter term {0:?} (expected key=value)")]
    Malformed(String),
    #[error("unknown filter key {0:?} (expected one of iface, vlan, pcp, dmac, udp_dst, dir, stream)")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("filter key {0} given twice")]
    Duplicate(String),
}

/// Conjunction of optional header and interface criteria.
///
/// `stream` is a convenience: it selects the destination MAC derived from a
/// stream id, and may not be combined with an explicit `dmac`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFilter", into = "RawFilter")]
pub struct StreamFilter {
    iface: Option<String>,
    vlan: Option<u16>,
    pcp: Option<u8>,
    dmac: Option<MacAddr>,
    udp_dst: Option<u16>,
    dir: Option<Direction>,
    stream: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFilter {
    #[serde(default)]
    pub iface: Option<String>,
    #[serde(default)]
    pub vlan: Option<u16>,
    #[serde(default)]
    pub pcp: Option<u8>,
    #[serde(default)]
    pub dmac: Option<MacAddr>,
    #[serde(default)]
    pub udp_dst: Option<u16>,
    #[serde(default)]
    pub dir: Option<Direction>,
    #[serde(default)]
    pub stream: Option<String>,
}

impl TryFrom<RawFilter> for StreamFilter {
    type Error = FilterError;

    fn try_from(r: RawFilter) -> Result<Self, FilterError> {
        StreamFilter::new(r)
    }
}

impl From<StreamFilter> for RawFilter {
    fn from(f: StreamFilter) -> Self {
        RawFilter {
            iface: f.iface,
            vlan: f.vlan,
            pcp: f.pcp,
            dmac: f.dmac,
            udp_dst: f.udp_dst,
            dir: f.dir,
            stream: f.stream,
        }
    }
}

impl StreamFilter {
    pub fn new(r: RawFilter) -> Result<Self, FilterError> {
        let any = r.iface.is_some()
            || r.vlan.is_some()
            || r.pcp.is_some()
            || r.dmac.is_some()
            || r.udp_dst.is_some()
            || r.dir.is_some()
            || r.stream.is_some();
        if !any {
            return Err(FilterError::Empty);
        }
        if r.stream.is_some() && r.dmac.is_some() {
            return Err(FilterError::Duplicate("dmac".into()));
        }
        if let Some(p) = r.pcp {
            if p > 7 {
                return Err(FilterError::BadValue { key: "pcp".into(), value: p.to_string() });
            }
        }
        if let Some(v) = r.vlan {
            if v > 4095 {
                return Err(FilterError::BadValue { key: "vlan".into(), value: v.to_string() });
            }
        }
        Ok(StreamFilter {
            iface: r.iface,
            vlan: r.vlan,
            pcp: r.pcp,
            dmac: r.dmac,
            udp_dst: r.udp_dst,
            dir: r.dir,
            stream: r.stream,
        })
    }

    pub fn udp_dst(port: u16) -> Self {
        StreamFilter::new(RawFilter { udp_dst: Some(port), ..Default::default() }).expect("non-empty")
    }

    pub fn stream(id: &str) -> Self {
        StreamFilter::new(RawFilter { stream: Some(id.to_string()), ..Default::default() }).expect("non-empty")
    }

    pub fn stream_id(&self) -> Option<&str> {
        self.stream.as_deref()
    }

    pub fn iface(&self) -> Option<&str> {
        self.iface.as_deref()
    }

    pub fn direction(&self) -> Option<Direction> {
        self.dir
    }

    /// Destination MAC the filter requires, explicit or derived from `stream`.
    pub fn effective_dmac(&self) -> Option<MacAddr> {
        self.dmac.or_else(|| self.stream.as_deref().map(stream_dmac))
    }

    /// True if the filter constrains only the interface, not the frames.
    pub fn has_header_criteria(&self) -> bool {
        self.vlan.is_some()
            || self.pcp.is_some()
            || self.dmac.is_some()
            || self.udp_dst.is_some()
            || self.stream.is_some()
    }

    pub fn matches_header(&self, h: &HeaderView) -> bool {
        if let Some(v) = self.vlan {
            if h.vlan != Some(v) {
                return false;
            }
        }
        if let Some(p) = self.pcp {
            if h.pcp != Some(p) {
                return false;
            }
        }
        if let Some(m) = self.effective_dmac() {
            if h.dmac != m {
                return false;
            }
        }
        if let Some(u) = self.udp_dst {
            if h.udp_dst != Some(u) {
                return false;
            }
        }
        true
    }

    pub fn matches_interface(&self, cp: &CapturePoint) -> bool {
        if let Some(name) = &self.iface {
            if &cp.meta.name != name {
                return false;
            }
        }
        if let Some(d) = self.dir {
            if cp.meta.direction != Some(d) {
                return false;
            }
        }
        true
    }

    pub fn matches_frame(&self, frame: &[u8]) -> bool {
        match HeaderView::parse(frame) {
            Some(h) => self.matches_header(&h),
            None => false,
        }
    }
}

impl FromStr for StreamFilter {
    type Err = FilterError;

    /// Parses `key=value` terms separated by commas.
    fn from_str(s: &str) -> Result<Self, FilterError> {
        let mut r = RawFilter::default();
        for term in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (k, v) = term.split_once('=').ok_or_else(|| FilterError::Malformed(term.to_string()))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || FilterError::BadValue { key: k.to_string(), value: v.to_string() };
            let dup = || FilterError::Duplicate(k.to_string());
            match k {
                "iface" => set(&mut r.iface, v.to_string()).ok_or_else(dup)?,
                "vlan" => set(&mut r.vlan, v.parse().map_err(|_| bad())?).ok_or_else(dup)?,
                "pcp" => set(&mut r.pcp, v.parse().map_err(|_| bad())?).ok_or_else(dup)?,
                "dmac" => set(&mut r.dmac, v.parse().map_err(|_| bad())?).ok_or_else(dup)?,
                "udp_dst" => set(&mut r.udp_dst, v.parse().map_err(|_| bad())?).ok_or_else(dup)?,
                "dir" => set(&mut r.dir, v.parse().map_err(|_| bad())?).ok_or_else(dup)?,
                "stream" => set(&mut r.stream, v.to_string()).ok_or_else(dup)?,
                other => return Err(FilterError::UnknownKey(other.to_string())),
            }
        }
        StreamFilter::new(r)
    }
}

fn set<T>(slot: &mut Option<T>, v: T) -> Option<()> {
    if slot.is_some() {
        return None;
    }
    *slot = Some(v);
    Some(())
}

impl fmt::Display for StreamFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        if let Some(v) = &self.iface {
            terms.push(format!("iface={v}"));
        }
        if let Some(v) = self.vlan {
            terms.push(format!("vlan={v}"));
        }
        if let Some(v) = self.pcp {
            terms.push(format!("pcp={v}"));
        }
        if let Some(v) = self.dmac {
            terms.push(format!("dmac={v}"));
        }
        if let Some(v) = self.udp_dst {
            terms.push(format!("udp_dst={v}"));
        }
        if let Some(v) = self.dir {
            terms.push(format!("dir={v}"));
        }
        if let Some(v) = &self.stream {
            terms.push(format!("stream={v}"));
        }
        f.write_str(&terms.join(","))
    }
}

/// Order-preserving subsequence of one capture point's packets.
pub fn filter_packets<'a>(cp: &'a CapturePoint, f: &StreamFilter) -> Vec<&'a LabeledPacket> {
    if !f.matches_interface(cp) {
        return Vec::new();
    }
    cp.packets.iter().filter(|p| f.matches_frame(&p.frame)).collect()
}

/// Filters a whole capture set. Packets from several capture points are
/// merged by timestamp (stable, so ties keep capture-point order).
pub fn filter_stream(set: &CaptureSet, f: &StreamFilter) -> Vec<LabeledPacket> {
    let mut out: Vec<LabeledPacket> = Vec::new();
    let mut sources = 0;
    for cp in &set.points {
        let sel = filter_packets(cp, f);
        if !sel.is_empty() {
            sources += 1;
        }
        out.extend(sel.into_iter().cloned());
    }
    if sources > 1 {
        out.sort_by_key(|p| p.ts);
    }
    out
}
