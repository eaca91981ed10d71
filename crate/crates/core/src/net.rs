//! Ethernet/VLAN/IPv4/UDP header helpers shared by the frame encoder and the
//! stream filters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ETHERTYPE_VLAN: u16 = 0x8100;
pub const ETHERTYPE_IPV4: u16 = 0x0800;
/// IEEE 1722 AVTP, used for raw (non-tunneled) streams.
pub const ETHERTYPE_AVTP: u16 = 0x22F0;
pub const IPPROTO_UDP: u8 = 17;

pub const MIN_FRAME: usize = 64;
pub const MAX_FRAME: usize = 1522;
pub const FCS_LEN: usize = 4;
/// Preamble, start delimiter and minimum inter-frame gap.
pub const WIRE_OVERHEAD: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid MAC address {0:?}")]
pub struct MacParseError(pub String);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", b[0], b[1], b[2], b[3], b[4], b[5])
    }
}

impl fmt::Debug for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for MacAddr {
    type Err = MacParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split([':', '-']).collect();
        if parts.len() != 6 {
            return Err(MacParseError(s.to_string()));
        }
        let mut out = [0u8; 6];
        for (o, p) in out.iter_mut().zip(parts) {
            if p.len() != 2 {
                return Err(MacParseError(s.to_string()));
            }
            *o = u8::from_str_radix(p, 16).map_err(|_| MacParseError(s.to_string()))?;
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Header fields the filters and anomaly matchers look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeaderView {
    pub dmac: MacAddr,
    pub smac: MacAddr,
    pub vlan: Option<u16>,
    pub pcp: Option<u8>,
    pub ethertype: u16,
    pub udp_dst: Option<u16>,
}

impl HeaderView {
    /// Parses the leading headers of an Ethernet frame. Returns `None` when
    /// the frame is too short to carry an Ethernet header.
    pub fn parse(frame: &[u8]) -> Option<HeaderView> {
        if frame.len() < 14 {
            return None;
        }
        let dmac = MacAddr(frame[0..6].try_into().ok()?);
        let smac = MacAddr(frame[6..12].try_into().ok()?);
        let mut off = 12;
        let mut ethertype = u16::from_be_bytes([frame[off], frame[off + 1]]);
        let (mut vlan, mut pcp) = (None, None);
        if ethertype == ETHERTYPE_VLAN {
            if frame.len() < 18 {
                return None;
            }
            let tci = u16::from_be_bytes([frame[14], frame[15]]);
            pcp = Some((tci >> 13) as u8);
            vlan = Some(tci & 0x0FFF);
            off = 16;
            ethertype = u16::from_be_bytes([frame[off], frame[off + 1]]);
        }
        off += 2;
        let mut udp_dst = None;
        if ethertype == ETHERTYPE_IPV4 && frame.len() >= off + 20 {
            let ihl = usize::from(frame[off] & 0x0F) * 4;
            if frame[off + 9] == IPPROTO_UDP && ihl >= 20 && frame.len() >= off + ihl + 8 {
                let u = off + ihl;
                udp_dst = Some(u16::from_be_bytes([frame[u + 2], frame[u + 3]]));
            }
        }
        Some(HeaderView { dmac, smac, vlan, pcp, ethertype, udp_dst })
    }
}

/// RFC 1071 ones' complement checksum.
pub fn internet_checksum(data: &[u8]) -> u16 {
    let mut sum: u32 = 0;
    for c in data.chunks(2) {
        let w = if c.len() == 2 { u16::from_be_bytes([c[0], c[1]]) } else { u16::from(c[0]) << 8 };
        sum += u32::from(w);
    }
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

/// Ethernet FCS over everything before the trailing four bytes, little-endian
/// on the wire.
pub fn write_fcs(frame: &mut [u8]) {
    let n = frame.len() - FCS_LEN;
    let crc = crc32fast::hash(&frame[..n]);
    frame[n..].copy_from_slice(&crc.to_le_bytes());
}

pub fn fcs_ok(frame: &[u8]) -> bool {
    if frame.len() < FCS_LEN {
        return false;
    }
    let n = frame.len() - FCS_LEN;
    crc32fast::hash(&frame[..n]).to_le_bytes() == frame[n..]
}

/// Serialization time of `frame_size` bytes plus wire overhead at `rate_bps`,
/// rounded up to whole nanoseconds.
pub fn tx_duration_ns(frame_size: usize, rate_bps: u64) -> u64 {
    let bits = ((frame_size + WIRE_OVERHEAD) * 8) as u128;
    ((bits * 1_000_000_000).div_ceil(rate_bps as u128)) as u64
}


/// Direction of a capture interface relative to its port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in" => Ok(Direction::In),
            "out" => Ok(Direction::Out),
            other => Err(format!("unknown direction {other:?} (expected in or out)")),
        }
    }
}

/// Group destination MAC of a stream: a locally administered multicast
/// prefix followed by five bytes of the SHA-256 of the stream id.
pub fn stream_dmac(stream_id: &str) -> MacAddr {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(stream_id.as_bytes());
    MacAddr([0x03, d[0], d[1], d[2], d[3], d[4]])
}

/// Unicast source MAC of a node.
pub fn node_smac(node: &str) -> MacAddr {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(node.as_bytes());
    MacAddr([0x02, 0x00, d[0], d[1], d[2], d[3]])
}
