//! PCAPNG writer and tolerant reader.
//!
//! Files written here hold one Section Header Block, one Interface
//! Description Block (nanosecond resolution, FCS length 4) and one Enhanced
//! Packet Block per packet whose comment carries the label string. All
//! integers are little-endian.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::label::{encode_label, parse_label};
use super::{CapturePoint, CaptureSet, InterfaceMeta, LabeledPacket};
use crate::anomaly::LabelPair;

pub const SHB: u32 = 0x0A0D_0D0A;
pub const IDB: u32 = 0x0000_0001;
pub const EPB: u32 = 0x0000_0006;
pub const BYTE_ORDER_MAGIC: u32 = 0x1A2B_3C4D;
pub const LINKTYPE_ETHERNET: u16 = 1;
pub const SNAP_LEN: u32 = 65_535;

const OPT_END: u16 = 0;
const OPT_COMMENT: u16 = 1;
const IF_NAME: u16 = 2;
const IF_SPEED: u16 = 8;
const IF_TSRESOL: u16 = 9;
const IF_FCSLEN: u16 = 13;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed PCAPNG at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("frame of {0} bytes exceeds the snap length")]
    FrameTooLong(usize),
    #[error("packet references unknown interface {0}")]
    UnknownInterface(u32),
}

fn malformed(offset: usize, reason: impl Into<String>) -> PcapError {
    PcapError::Malformed { offset, reason: reason.into() }
}

/// What the reader tolerated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadReport {
    pub blocks: usize,
    /// Blocks of types this reader does not interpret.
    pub skipped_blocks: usize,
    /// Packets without a comment, labeled BENIGN.
    pub missing_comments: usize,
    /// Comments not following the label grammar, labeled BENIGN.
    pub bad_comments: usize,
}

fn pad4(n: usize) -> usize {
    (n + 3) & !3
}

fn push_option(out: &mut Vec<u8>, code: u16, value: &[u8]) {
    out.extend_from_slice(&code.to_le_bytes());
    out.extend_from_slice(&(value.len() as u16).to_le_bytes());
    out.extend_from_slice(value);
    out.resize(pad4(out.len()), 0);
}

fn push_block(out: &mut Vec<u8>, kind: u32, body: &[u8]) {
    let total = (12 + body.len()) as u32;
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&total.to_le_bytes());
    out.extend_from_slice(body);
    out.extend_from_slice(&total.to_le_bytes());
}

/// Encodes one capture point as a complete PCAPNG file.
pub fn encode_capture_point(cp: &CapturePoint) -> Result<Vec<u8>, PcapError> {
    let mut out = Vec::with_capacity(64 + cp.packets.iter().map(|p| p.frame.len() + 64).sum::<usize>());

    let mut shb = Vec::new();
    shb.extend_from_slice(&BYTE_ORDER_MAGIC.to_le_bytes());
    shb.extend_from_slice(&1u16.to_le_bytes());
    shb.extend_from_slice(&0u16.to_le_bytes());
    shb.extend_from_slice(&(-1i64).to_le_bytes());
    push_block(&mut out, SHB, &shb);

    let mut idb = Vec::new();
    idb.extend_from_slice(&LINKTYPE_ETHERNET.to_le_bytes());
    idb.extend_from_slice(&0u16.to_le_bytes());
    idb.extend_from_slice(&SNAP_LEN.to_le_bytes());
    push_option(&mut idb, IF_NAME, cp.meta.name.as_bytes());
    if let Some(speed) = cp.meta.speed_bps {
        push_option(&mut idb, IF_SPEED, &speed.to_le_bytes());
    }
    push_option(&mut idb, IF_TSRESOL, &[9]);
    push_option(&mut idb, IF_FCSLEN, &[4]);
    push_option(&mut idb, OPT_END, &[]);
    push_block(&mut out, IDB, &idb);

    let mut epb = Vec::new();
    for p in &cp.packets {
        if p.frame.len() > SNAP_LEN as usize {
            return Err(PcapError::FrameTooLong(p.frame.len()));
        }
        epb.clear();
        epb.extend_from_slice(&0u32.to_le_bytes());
        epb.extend_from_slice(&((p.ts >> 32) as u32).to_le_bytes());
        epb.extend_from_slice(&(p.ts as u32).to_le_bytes());
        epb.extend_from_slice(&(p.frame.len() as u32).to_le_bytes());
        epb.extend_from_slice(&(p.frame.len() as u32).to_le_bytes());
        epb.extend_from_slice(&p.frame);
        epb.resize(pad4(epb.len()), 0);
        push_option(&mut epb, OPT_COMMENT, encode_label(&p.labels).as_bytes());
        push_option(&mut epb, OPT_END, &[]);
        push_block(&mut out, EPB, &epb);
    }
    Ok(out)
}

pub fn write_capture_point(cp: &CapturePoint, path: &Path) -> Result<(), PcapError> {
    fs::write(path, encode_capture_point(cp)?)?;
    Ok(())
}

/// Writes one file per capture point into `dir`, named after `scenario`.
pub fn write_capture(set: &CaptureSet, dir: &Path, scenario: &str) -> Result<Vec<PathBuf>, PcapError> {
    let mut paths = Vec::new();
    for cp in &set.points {
        let path = dir.join(cp.file_name(scenario));
        write_capture_point(cp, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Clone, Copy)]
struct Endian(bool);

impl Endian {
    fn u16(self, b: &[u8]) -> u16 {
        let a = [b[0], b[1]];
        if self.0 {
            u16::from_be_bytes(a)
        } else {
            u16::from_le_bytes(a)
        }
    }

    fn u32(self, b: &[u8]) -> u32 {
        let a = [b[0], b[1], b[2], b[3]];
        if self.0 {
            u32::from_be_bytes(a)
        } else {
            u32::from_le_bytes(a)
        }
    }

    fn u64(self, b: &[u8]) -> u64 {
        let a: [u8; 8] = b[..8].try_into().expect("8 bytes");
        if self.0 {
            u64::from_be_bytes(a)
        } else {
            u64::from_le_bytes(a)
        }
    }
}

/// Timestamp unit of an interface.
#[derive(Clone, Copy)]
enum Resol {
    Dec(u8),
    Bin(u8),
}

impl Resol {
    fn to_ns(self, ts: u64) -> u64 {
        match self {
            Resol::Dec(9) => ts,
            Resol::Dec(e) if e < 9 => ts.saturating_mul(10u64.pow(u32::from(9 - e))),
            Resol::Dec(e) => (u128::from(ts) / 10u128.pow(u32::from(e - 9))) as u64,
            Resol::Bin(e) => ((u128::from(ts) * 1_000_000_000) >> e.min(127)) as u64,
        }
    }
}

struct Options<'a> {
    items: Vec<(u16, &'a [u8])>,
}

fn parse_options(b: &[u8], base: usize, e: Endian) -> Result<Options<'_>, PcapError> {
    let mut items = Vec::new();
    let mut i = 0;
    while i + 4 <= b.len() {
        let code = e.u16(&b[i..]);
        let len = usize::from(e.u16(&b[i + 2..]));
        if code == OPT_END {
            return Ok(Options { items });
        }
        let end = i + 4 + len;
        if end > b.len() {
            return Err(malformed(base + i, format!("option {code} overruns its block")));
        }
        items.push((code, &b[i + 4..end]));
        i = pad4(end);
    }
    if i != b.len() {
        return Err(malformed(base + i, "options are not padded to 32 bits"));
    }
    Ok(Options { items })
}

impl Options<'_> {
    fn get(&self, code: u16) -> Option<&[u8]> {
        self.items.iter().find(|o| o.0 == code).map(|o| o.1)
    }

    fn count(&self, code: u16) -> usize {
        self.items.iter().filter(|o| o.0 == code).count()
    }
}

struct Iface {
    point: usize,
    resol: Resol,
}

/// Parses PCAPNG bytes. Every interface becomes one capture point.
pub fn read_capture_bytes(data: &[u8]) -> Result<(CaptureSet, ReadReport), PcapError> {
    let mut set = CaptureSet::default();
    let mut rep = ReadReport::default();
    let mut ifaces: Vec<Iface> = Vec::new();
    let mut e = Endian(false);
    let mut off = 0;
    let mut seen_shb = false;
    while off < data.len() {
        if data.len() - off < 12 {
            return Err(malformed(off, "truncated block header"));
        }
        let raw_type = u32::from_le_bytes(data[off..off + 4].try_into().expect("4 bytes"));
        if raw_type == SHB {
            let magic = &data[off + 8..off + 12];
            e = match u32::from_le_bytes(magic.try_into().expect("4 bytes")) {
                BYTE_ORDER_MAGIC => Endian(false),
                m if m.swap_bytes() == BYTE_ORDER_MAGIC => Endian(true),
                _ => return Err(malformed(off + 8, "bad byte-order magic")),
            };
            ifaces.clear();
            seen_shb = true;
        } else if !seen_shb {
            return Err(malformed(off, "file does not start with a section header"));
        }
        let kind = e.u32(&data[off..]);
        let total = e.u32(&data[off + 4..]) as usize;
        if total < 12 || total % 4 != 0 || off + total > data.len() {
            return Err(malformed(off + 4, format!("bad block length {total}")));
        }
        let trailer = e.u32(&data[off + total - 4..]) as usize;
        if trailer != total {
            return Err(malformed(off + total - 4, format!("trailing length {trailer} differs from {total}")));
        }
        let body = &data[off + 8..off + total - 4];
        let base = off + 8;
        rep.blocks += 1;
        match kind {
            SHB => {
                if body.len() < 16 {
                    return Err(malformed(base, "short section header"));
                }
                parse_options(&body[16..], base + 16, e)?;
            }
            IDB => {
                if body.len() < 8 {
                    return Err(malformed(base, "short interface description"));
                }
                let opts = parse_options(&body[8..], base + 8, e)?;
                let name = opts
                    .get(IF_NAME)
                    .map(|v| String::from_utf8_lossy(v).trim_end_matches('\0').to_string())
                    .unwrap_or_else(|| format!("if{}", set.points.len()));
                let speed = opts.get(IF_SPEED).filter(|v| v.len() >= 8).map(|v| e.u64(v));
                let resol = match opts.get(IF_TSRESOL).and_then(|v| v.first()) {
                    None => Resol::Dec(6),
                    Some(&r) if r & 0x80 != 0 => Resol::Bin(r & 0x7F),
                    Some(&r) => Resol::Dec(r),
                };
                let direction = InterfaceMeta::direction_from_name(&name);
                ifaces.push(Iface { point: set.points.len(), resol });
                set.points.push(CapturePoint::new(InterfaceMeta { name, speed_bps: speed, direction }));
            }
            EPB => {
                if body.len() < 20 {
                    return Err(malformed(base, "short enhanced packet block"));
                }
                let if_id = e.u32(body);
                let ts = (u64::from(e.u32(&body[4..])) << 32) | u64::from(e.u32(&body[8..]));
                let cap = e.u32(&body[12..]) as usize;
                let data_end = 20 + cap;
                if data_end > body.len() {
                    return Err(malformed(base + 12, "captured length overruns the block"));
                }
                let frame = body[20..data_end].to_vec();
                let opts = parse_options(&body[pad4(data_end)..], base + pad4(data_end), e)?;
                let labels = match opts.get(OPT_COMMENT) {
                    None => {
                        rep.missing_comments += 1;
                        LabelPair::benign()
                    }
                    Some(c) => match std::str::from_utf8(c).ok().and_then(|s| parse_label(s).ok()) {
                        Some(l) => l,
                        None => {
                            rep.bad_comments += 1;
                            LabelPair::benign()
                        }
                    },
                };
                let iface = ifaces.get(if_id as usize).ok_or(PcapError::UnknownInterface(if_id))?;
                let pt = &mut set.points[iface.point];
                pt.packets.push(LabeledPacket { ts: iface.resol.to_ns(ts), frame, labels });
            }
            _ => rep.skipped_blocks += 1,
        }
        off += total;
    }
    Ok((set, rep))
}

/// Reads a capture file, logging what the reader had to tolerate.
pub fn read_capture(path: &Path) -> Result<CaptureSet, PcapError> {
    let data = fs::read(path)?;
    let (set, rep) = read_capture_bytes(&data)?;
    if rep.skipped_blocks > 0 {
        log::warn!("{}: skipped {} unsupported block(s)", path.display(), rep.skipped_blocks);
    }
    if rep.bad_comments > 0 {
        log::warn!("{}: {} comment(s) are not labels, read as BENIGN", path.display(), rep.bad_comments);
    }
    Ok(set)
}

/// Structural check used for conformance: block lengths agree, options are
/// padded, and every packet block carries exactly one comment.
pub fn check_structure(data: &[u8]) -> Result<ReadReport, PcapError> {
    let (_, rep) = read_capture_bytes(data)?;
    let mut off = 0;
    let mut e = Endian(false);
    while off < data.len() {
        if u32::from_le_bytes(data[off..off + 4].try_into().expect("4 bytes")) == SHB {
            e = Endian(u32::from_le_bytes(data[off + 8..off + 12].try_into().expect("4 bytes")) != BYTE_ORDER_MAGIC);
        }
        let kind = e.u32(&data[off..]);
        let total = e.u32(&data[off + 4..]) as usize;
        if kind == EPB {
            let body = &data[off + 8..off + total - 4];
            let data_end = pad4(20 + e.u32(&body[12..]) as usize);
            let opts = parse_options(&body[data_end..], off + 8 + data_end, e)?;
            if opts.count(OPT_COMMENT) != 1 {
                return Err(malformed(off, "packet block without exactly one comment"));
            }
        }
        off += total;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::PacketLabel;
    use crate::net::Direction;

    fn point(n: usize) -> CapturePoint {
        let mut cp = CapturePoint::new(InterfaceMeta::new("switchFrontRight", "eth0", Direction::In, 1_000_000_000));
        for i in 0..n {
            let label = if i % 3 == 1 { LabelPair::new(PacketLabel::Delayed, "delay_attack") } else { LabelPair::benign() };
            cp.packets.push(LabeledPacket { ts: 2_003_023_000 + i as u64 * 1000, frame: vec![i as u8; 64 + i], labels: label });
        }
        cp
    }

    #[test]
    fn empty_point_has_two_blocks() {
        let b = encode_capture_point(&point(0)).unwrap();
        let (set, rep) = read_capture_bytes(&b).unwrap();
        assert_eq!(rep.blocks, 2);
        assert_eq!(set.points.len(), 1);
        assert!(set.points[0].packets.is_empty());
        assert_eq!(set.points[0].meta.name, "switchFrontRight-eth0-in");
        assert_eq!(set.points[0].meta.speed_bps, Some(1_000_000_000));
        assert_eq!(set.points[0].meta.direction, Some(Direction::In));
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let cp = point(7);
        let b = encode_capture_point(&cp).unwrap();
        check_structure(&b).unwrap();
        let (set, _) = read_capture_bytes(&b).unwrap();
        assert_eq!(set.points[0], cp);
        assert_eq!(encode_capture_point(&set.points[0]).unwrap(), b);
    }

    #[test]
    fn comment_bytes_follow_grammar() {
        let b = encode_capture_point(&point(2)).unwrap();
        let s = String::from_utf8_lossy(&b);
        assert!(s.contains("BENIGN - "));
        assert!(s.contains("DELAYED - delay_attack"));
    }

    /// Big-endian file in microseconds, no comments, an unknown block and a
    /// second interface.
    #[test]
    fn tolerant_reader() {
        let mut f = Vec::new();
        let be_block = |f: &mut Vec<u8>, kind: u32, body: &[u8]| {
            let total = (12 + body.len()) as u32;
            f.extend_from_slice(&kind.to_be_bytes());
            f.extend_from_slice(&total.to_be_bytes());
            f.extend_from_slice(body);
            f.extend_from_slice(&total.to_be_bytes());
        };
        let mut shb = BYTE_ORDER_MAGIC.to_be_bytes().to_vec();
        shb.extend_from_slice(&[0, 1, 0, 0]);
        shb.extend_from_slice(&(-1i64).to_be_bytes());
        be_block(&mut f, SHB, &shb);
        for _ in 0..2 {
            let mut idb = vec![0, 1, 0, 0];
            idb.extend_from_slice(&65535u32.to_be_bytes());
            be_block(&mut f, IDB, &idb);
        }
        be_block(&mut f, 0x0BAD, &[1, 2, 3, 4]);
        let mut epb = 1u32.to_be_bytes().to_vec();
        epb.extend_from_slice(&0u32.to_be_bytes());
        epb.extend_from_slice(&1_500_000u32.to_be_bytes());
        epb.extend_from_slice(&64u32.to_be_bytes());
        epb.extend_from_slice(&64u32.to_be_bytes());
        epb.extend_from_slice(&[0xAB; 64]);
        be_block(&mut f, EPB, &epb);

        let (set, rep) = read_capture_bytes(&f).unwrap();
        assert_eq!(rep.skipped_blocks, 1);
        assert_eq!(rep.missing_comments, 1);
        assert_eq!(set.points.len(), 2);
        assert!(set.points[0].packets.is_empty());
        let p = &set.points[1].packets[0];
        assert_eq!(p.ts, 1_500_000_000);
        assert_eq!(p.labels, LabelPair::benign());
        assert_eq!(set.points[1].meta.name, "if1");
    }

    #[test]
    fn rejects_broken_lengths() {
        let mut b = encode_capture_point(&point(1)).unwrap();
        let n = b.len();
        b[n - 4] ^= 0x04;
        assert!(matches!(read_capture_bytes(&b), Err(PcapError::Malformed { .. })));
        assert!(read_capture_bytes(&b[..n - 2]).is_err());
    }

    #[test]
    fn resolutions() {
        assert_eq!(Resol::Dec(6).to_ns(3), 3000);
        assert_eq!(Resol::Dec(12).to_ns(3000), 3);
        assert_eq!(Resol::Bin(10).to_ns(1024), 1_000_000_000);
    }
}
