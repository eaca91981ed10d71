//! Runs a scenario in memory and prints listener statistics.
//!
//! `cargo run --release -p tsn-nads --example run_stats -- scenarios/baseline.json [seconds]`

use std::path::PathBuf;
use std::time::Instant;

use tsn_nads::scenario::parse_scenario_file;
use tsn_nads::sim::{run_simulation, SimOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().expect("scenario path"));
    let mut cfg = parse_scenario_file(&path).expect("scenario parses");
    if let Some(s) = args.next() {
        let secs: f64 = s.parse().expect("seconds");
        cfg.duration_ns = (secs * 1e9) as u64;
    }
    let t0 = Instant::now();
    let out = run_simulation(&cfg, &SimOptions::default()).expect("simulation runs");
    eprintln!("{} events in {:.1?}", out.events, t0.elapsed());
    out.stats.write_csv(std::io::stdout()).expect("stdout");
    for c in &out.stats.captures {
        eprintln!("capture {} {}", c.iface, c.packets);
    }
    eprintln!("queue drops {}", out.stats.queue_drops);
    let unbalanced = out.conservation.iter().filter(|r| !r.balanced()).count();
    eprintln!("conservation rows {} unbalanced {unbalanced}", out.conservation.len());
    for (id, s) in &out.anomalies {
        eprintln!("anomaly {id}: {s:?}");
    }
}
