//! PCAPNG encoding: structure, round trips, the steer-by-wire fixture.

use std::path::Path;

use proptest::prelude::*;
use tsn_nads::anomaly::{LabelPair, PacketLabel};
use tsn_nads::dataset::{
    check_structure, encode_capture_point, encode_label, parse_label, read_capture, read_capture_bytes, CapturePoint,
    InterfaceMeta, LabeledPacket,
};
use tsn_nads::nads::{filter_stream, StreamFilter};
use tsn_nads::net::Direction;

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/delay_steer_excerpt.pcapng")
}

#[test]
fn fixture_first_delayed_packet() {
    let set = read_capture(&fixture()).unwrap();
    assert_eq!(set.points.len(), 1);
    let cp = &set.points[0];
    assert_eq!(cp.meta.name, "switchFrontLeft-eth0-out");
    let first = cp.packets.iter().find(|p| p.labels.packet == PacketLabel::Delayed).unwrap();
    assert_eq!(first.ts, 2_003_023_000);
    assert_eq!(first.labels.phase, "delay_attack");
    assert_eq!(encode_label(&first.labels), "DELAYED - delay_attack");

    // Benign with an empty phase until 2 s; the frame after a delay recovers.
    for p in cp.packets.iter().filter(|p| p.ts < 2_000_000_000) {
        assert_eq!(p.labels, LabelPair::benign());
    }
    let i = cp.packets.iter().position(|p| p.ts == first.ts).unwrap();
    assert_eq!(cp.packets[i + 1].labels.packet, PacketLabel::BenignRecovered);
}

#[test]
fn fixture_udp_filter_keeps_steer_frames() {
    let set = read_capture(&fixture()).unwrap();
    let kept = filter_stream(&set, &StreamFilter::udp_dst(1200));
    assert_eq!(kept.len(), set.packet_count());
    assert!(filter_stream(&set, &StreamFilter::udp_dst(1100)).is_empty());
    let by_id = filter_stream(&set, &"stream=manual_steer,dir=out".parse().unwrap());
    assert_eq!(by_id.len(), kept.len());
}

#[test]
fn fixture_round_trips_byte_exact() {
    let bytes = std::fs::read(fixture()).unwrap();
    let rep = check_structure(&bytes).unwrap();
    assert_eq!(rep.skipped_blocks + rep.missing_comments + rep.bad_comments, 0);
    let (set, _) = read_capture_bytes(&bytes).unwrap();
    assert_eq!(encode_capture_point(&set.points[0]).unwrap(), bytes);
}

fn label() -> impl Strategy<Value = LabelPair> {
    let packet = prop::sample::select(PacketLabel::ALL.to_vec());
    (packet, "[a-z_]{0,12}").prop_map(|(p, ph)| LabelPair::new(p, ph))
}

fn capture_point() -> impl Strategy<Value = CapturePoint> {
    let pkt = (0u64..1 << 40, prop::collection::vec(any::<u8>(), 60..200), label());
    (prop::collection::vec(pkt, 0..40), prop::bool::ANY, 1u64..10_000_000_000).prop_map(|(mut pkts, dir, speed)| {
        pkts.sort_by_key(|p| p.0);
        let d = if dir { Direction::In } else { Direction::Out };
        let mut cp = CapturePoint::new(InterfaceMeta::new("sw", "eth3", d, speed));
        cp.packets = pkts.into_iter().map(|(ts, frame, labels)| LabeledPacket { ts, frame, labels }).collect();
        cp
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_read_encode_is_identity(cp in capture_point()) {
        let bytes = encode_capture_point(&cp).unwrap();
        let rep = check_structure(&bytes).unwrap();
        prop_assert_eq!(rep.blocks, cp.packets.len() + 2);
        let (set, rep) = read_capture_bytes(&bytes).unwrap();
        prop_assert_eq!(rep.bad_comments, 0);
        prop_assert_eq!(&set.points[0], &cp);
        prop_assert_eq!(encode_capture_point(&set.points[0]).unwrap(), bytes);
    }

    #[test]
    fn label_grammar_round_trips(l in label()) {
        prop_assert_eq!(parse_label(&encode_label(&l)).unwrap(), l);
    }

    #[test]
    fn truncated_files_are_rejected(cp in capture_point(), cut in 1usize..64) {
        let bytes = encode_capture_point(&cp).unwrap();
        let end = bytes.len().saturating_sub(cut);
        prop_assert!(check_structure(&bytes[..end]).is_err());
    }
}
