use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::Context;
use tsn_nads::dataset::library::MANIFEST_FILE;
use tsn_nads::dataset::RunManifest;

use crate::evaluate::{EvaluationRecord, EVALUATION_FILE};
use crate::Failure;

pub const TABLE_HEADER: [&str; 9] = ["scenario", "detector", "filter", "tp", "fp", "tn", "fn", "precision", "recall"];

/// Directories under `root` (inclusive), depth first in name order.
fn walk(root: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    out.push(root.to_path_buf());
    let mut children: Vec<PathBuf> = fs::read_dir(root)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .filter(|e| !e.file_name().to_string_lossy().starts_with('.'))
        .map(|e| e.path())
        .collect();
    children.sort();
    for c in children {
        walk(&c, out)?;
    }
    Ok(())
}

fn ratio(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn run(library: &Path) -> Result<(), Failure> {
    let mut dirs = Vec::new();
    walk(library, &mut dirs).with_context(|| format!("reading library {}", library.display()))?;

    let mut rows = Vec::new();
    for dir in &dirs {
        if dir.join(MANIFEST_FILE).is_file() {
            match RunManifest::read(dir) {
                Ok(m) => {
                    for issue in m.verify(dir) {
                        eprintln!("warning: integrity: {}: {}", dir.join(&issue.file).display(), issue.problem);
                    }
                }
                Err(e) => eprintln!("warning: integrity: {e}"),
            }
        }
        let eval = dir.join(EVALUATION_FILE);
        if eval.is_file() {
            let rec: EvaluationRecord = match fs::read(&eval)
                .map_err(anyhow::Error::from)
                .and_then(|b| serde_json::from_slice(&b).map_err(anyhow::Error::from))
            {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("warning: skipping {}: {e}", eval.display());
                    continue;
                }
            };
            let scenario = rec.test.scenario.clone().unwrap_or_else(|| {
                Path::new(&rec.test.file).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            let r = rec.report;
            let row = vec![
                scenario,
                rec.detector.to_string(),
                rec.filter.clone(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.tn.to_string(),
                r.fn_.to_string(),
                ratio(r.precision),
                ratio(r.recall),
            ];
            rows.push((row, dir.clone()));
        }
    }
    rows.sort();

    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(TABLE_HEADER)?;
    for (row, _) in &rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
