use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use tsn_nads::dataset::{encode_capture_point, sha256_hex, EntryWriter, RunManifest};
use tsn_nads::scenario::{parse_scenario_file, to_json, validate_scenario};
use tsn_nads::sim::{run_simulation, SimError, SimOptions};

use crate::Failure;

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let started = Instant::now();
    let mut cfg = parse_scenario_file(config).map_err(Failure::usage)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = validate_scenario(&cfg);
    for w in &report.warnings {
        log::warn!("{w}");
    }
    if !report.is_ok() {
        for e in &report.errors {
            eprintln!("invalid: {e}");
        }
        return Err(Failure::usage(anyhow!("{}: {} validation error(s)", config.display(), report.errors.len())));
    }

    // Claim the entry before the (long) run so a clash fails fast.
    let mut entry = EntryWriter::create(out, &cfg.name)?;
    let resolved = to_json(&cfg);
    let sim = run_simulation(&cfg, &SimOptions::default()).map_err(|e| match e {
        SimError::Invalid(_) | SimError::Unschedulable { .. } => Failure::usage(e),
    })?;

    for cp in &sim.captures.points {
        let bytes = encode_capture_point(cp).with_context(|| format!("encoding {}", cp.meta.name))?;
        entry.add(&cp.file_name(&cfg.name), &bytes)?;
    }
    let mut buf = Vec::new();
    sim.stats.write_csv(&mut buf)?;
    entry.add("stats.csv", &buf)?;
    buf.clear();
    sim.stats.write_sources_csv(&mut buf)?;
    entry.add("sources.csv", &buf)?;
    buf.clear();
    sim.stats.write_capture_csv(&mut buf)?;
    entry.add("captures.csv", &buf)?;
    buf.clear();
    sim.ledger.write_csv(&mut buf)?;
    entry.add("ledger.csv", &buf)?;
    entry.add("scenario.json", resolved.as_bytes())?;

    let manifest = RunManifest {
        scenario: cfg.name.clone(),
        seed: cfg.seed,
        duration_ns: cfg.duration_ns,
        config_hash: sha256_hex(resolved.as_bytes()),
        files: Vec::new(),
        wall_clock_ms: started.elapsed().as_millis() as u64,
    };
    let dir = entry.commit(manifest)?;
    log::info!("{} events; wrote {}", sim.events, dir.display());
    println!("{}", dir.display());
    Ok(())
}
