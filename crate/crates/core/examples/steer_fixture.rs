//! Writes the steer-by-wire excerpt fixture used by the format tests.
//!
//! Frames come from the shipped baseline's `manual_steer` stream as seen
//! on the egress of switchFrontLeft eth0: one frame per millisecond, benign
//! before 2 s, then the `delay_attack` phase with 10 us delays at most once
//! per 10 ms. The first delayed frame is stamped 2.003023 s.
//!
//! `cargo run -p tsn-nads --example steer_fixture`

use std::path::Path;

use tsn_nads::anomaly::{LabelPair, PacketLabel};
use tsn_nads::dataset::{write_capture_point, CapturePoint, InterfaceMeta, LabeledPacket};
use tsn_nads::net::Direction;
use tsn_nads::scenario::{parse_scenario_file, resolve_streams};
use tsn_nads::sim::frame::FrameTemplate;

const PHASE: &str = "delay_attack";
const FIRST_NS: u64 = 1_990_013_000;
const LAST_NS: u64 = 2_030_013_000;
const DELAY_NS: u64 = 10_000;
/// Nominal send instants that get delayed.
const DELAYED_AT: [u64; 3] = [2_003_013_000, 2_014_013_000, 2_027_013_000];

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let cfg = parse_scenario_file(&root.join("scenarios/baseline.json")).expect("baseline parses");
    let (plan, _) = resolve_streams(&cfg);
    let steer = plan.streams.iter().find(|s| s.id == "manual_steer").expect("manual_steer stream");
    let template = FrameTemplate::new(steer);

    let mut cp = CapturePoint::new(InterfaceMeta::new("switchFrontLeft", "eth0", Direction::Out, 1_000_000_000));
    let mut recovering = false;
    for (seq, t) in (FIRST_NS..=LAST_NS).step_by(1_000_000).enumerate() {
        let phase = if t >= 2_000_000_000 { PHASE } else { "" };
        let (ts, label) = if DELAYED_AT.contains(&t) {
            recovering = true;
            (t + DELAY_NS, PacketLabel::Delayed)
        } else if recovering {
            recovering = false;
            (t, PacketLabel::BenignRecovered)
        } else {
            (t, PacketLabel::Benign)
        };
        cp.packets.push(LabeledPacket {
            ts,
            frame: template.encode(seq as u64 + 1_990, &[]),
            labels: LabelPair::new(label, phase),
        });
    }

    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/delay_steer_excerpt.pcapng");
    std::fs::create_dir_all(out.parent().expect("fixture dir")).expect("create fixture dir");
    write_capture_point(&cp, &out).expect("write fixture");
    println!("{} packets -> {}", cp.packets.len(), out.display());
}
