//! Simulates the baseline and one anomaly scenario with a given seed and
//! scores a detector on the scenario's capture point.
//!
//! `cargo run --release -p tsn-nads --example detect_probe -- <scenario.json> <iface> <detector> [seed] [k=v ...]`

use std::path::PathBuf;

use tsn_nads::nads::pipeline::write_trace_csv;
use tsn_nads::nads::{run_evaluation, DetectorKind, Params, WindowConfig};
use tsn_nads::scenario::parse_scenario_file;
use tsn_nads::sim::{run_simulation, SimOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().expect("scenario path"));
    let iface = args.next().expect("iface");
    let kind: DetectorKind = args.next().expect("detector").parse().expect("detector kind");
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(1);
    let mut params = Params::default();
    for t in args {
        params.parse_term(&t).expect("k=v");
    }

    let mut base = parse_scenario_file(&path.with_file_name("baseline.json")).expect("baseline");
    let mut test = parse_scenario_file(&path).expect("scenario");
    base.seed = seed;
    test.seed = std::env::var("TEST_SEED").map(|s| s.parse().expect("seed")).unwrap_or(seed);
    let train = run_simulation(&base, &SimOptions::default()).expect("baseline runs").captures;
    let abn = run_simulation(&test, &SimOptions::default()).expect("scenario runs").captures;
    if std::env::var("DUMP").is_ok() {
        for cp in &abn.points {
            for p in &cp.packets {
                println!("{} {} {} {:?} {:?}", cp.meta.name, p.ts, p.frame.len(), p.labels.packet, p.labels.phase);
            }
        }
    }
    let filter = format!("iface={iface}").parse().expect("filter");
    let ev = run_evaluation(&train, &abn, &filter, kind, &params, seed, &WindowConfig::default()).expect("evaluation");
    println!("{} training windows; {:?}", ev.training_windows, ev.report);
    if let Ok(out) = std::env::var("TRACE_OUT") {
        write_trace_csv(&ev.trace, std::fs::File::create(out).expect("trace file")).expect("trace");
    }
}
