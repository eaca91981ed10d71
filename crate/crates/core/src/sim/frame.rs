//! On-wire encoding of stream frames.

use crate::net::{internet_checksum, write_fcs, ETHERTYPE_AVTP, ETHERTYPE_IPV4, ETHERTYPE_VLAN, FCS_LEN, IPPROTO_UDP};
use crate::scenario::{ResolvedStream, Transport};

/// Precomputed frame of one stream; only the sequence number and the FCS
/// change between frames.
#[derive(Debug, Clone)]
pub struct FrameTemplate {
    bytes: Vec<u8>,
    payload_offset: usize,
}

impl FrameTemplate {
    pub fn new(s: &ResolvedStream) -> Self {
        let size = s.frame_size as usize;
        let mut b = vec![0u8; size];
        b[0..6].copy_from_slice(&s.dmac.0);
        b[6..12].copy_from_slice(&s.smac.0);
        b[12..14].copy_from_slice(&ETHERTYPE_VLAN.to_be_bytes());
        let tci = (u16::from(s.pcp) << 13) | (s.vlan & 0x0FFF);
        b[14..16].copy_from_slice(&tci.to_be_bytes());
        let payload_offset = match s.transport {
            Transport::UdpTunnel { dest_port } => {
                b[16..18].copy_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
                let ip = 18;
                let total = (20 + 8 + s.payload_len) as u16;
                b[ip] = 0x45;
                b[ip + 1] = s.pcp << 5;
                b[ip + 2..ip + 4].copy_from_slice(&total.to_be_bytes());
                b[ip + 6] = 0x40;
                b[ip + 8] = 64;
                b[ip + 9] = IPPROTO_UDP;
                b[ip + 12..ip + 16].copy_from_slice(&[10, s.smac.0[3], s.smac.0[4], s.smac.0[5]]);
                b[ip + 16..ip + 20].copy_from_slice(&[239, s.dmac.0[3] & 0x7F, s.dmac.0[4], s.dmac.0[5]]);
                let csum = internet_checksum(&b[ip..ip + 20]);
                b[ip + 10..ip + 12].copy_from_slice(&csum.to_be_bytes());
                let udp = ip + 20;
                b[udp..udp + 2].copy_from_slice(&dest_port.to_be_bytes());
                b[udp + 2..udp + 4].copy_from_slice(&dest_port.to_be_bytes());
                b[udp + 4..udp + 6].copy_from_slice(&((8 + s.payload_len) as u16).to_be_bytes());
                udp + 8
            }
            Transport::Raw => {
                b[16..18].copy_from_slice(&ETHERTYPE_AVTP.to_be_bytes());
                18
            }
        };
        FrameTemplate { bytes: b, payload_offset }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn payload_offset(&self) -> usize {
        self.payload_offset
    }

    /// Frame for sequence number `seq`, with optional byte patches applied
    /// before the FCS is computed.
    pub fn encode(&self, seq: u64, patches: &[(usize, Vec<u8>)]) -> Vec<u8> {
        let mut f = self.bytes.clone();
        let p = self.payload_offset;
        let room = f.len() - FCS_LEN - p;
        let seq_bytes = seq.to_be_bytes();
        let n = room.min(8);
        f[p..p + n].copy_from_slice(&seq_bytes[..n]);
        let limit = f.len() - FCS_LEN;
        for (off, bytes) in patches {
            for (i, v) in bytes.iter().enumerate() {
                if off + i < limit {
                    f[off + i] = *v;
                }
            }
        }
        write_fcs(&mut f);
        f
    }
}

/// Sequence number carried by a frame built from `template`.
pub fn decode_seq(template: &FrameTemplate, frame: &[u8]) -> Option<u64> {
    let p = template.payload_offset;
    frame.get(p..p + 8).map(|b| u64::from_be_bytes(b.try_into().expect("8 bytes")))
}
