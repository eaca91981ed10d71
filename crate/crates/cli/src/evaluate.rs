use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};
use tsn_nads::dataset::{read_capture_bytes, sha256_hex, CaptureSet, EntryWriter, RunManifest};
use tsn_nads::nads::eval::EvalReport;
use tsn_nads::nads::pipeline::write_trace_csv;
use tsn_nads::nads::{run_evaluation, DetectorKind, NadsError, Params, StreamFilter, WindowConfig};

use crate::Failure;

pub const EVALUATION_FILE: &str = "evaluation.json";

pub struct Args {
    pub train: PathBuf,
    pub test: PathBuf,
    pub filter: String,
    pub detector: String,
    pub params: Vec<String>,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFile {
    pub file: String,
    /// Scenario of the library entry holding the file, if any.
    pub scenario: Option<String>,
    pub sha256: String,
}

/// Contents of `evaluation.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub detector: DetectorKind,
    pub params: Params,
    pub filter: String,
    pub seed: u64,
    pub train: InputFile,
    pub test: InputFile,
    pub training_windows: usize,
    pub test_windows: usize,
    pub threshold: f64,
    pub report: EvalReport,
}

fn load(path: &Path) -> Result<(CaptureSet, InputFile), Failure> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (set, rep) = read_capture_bytes(&bytes).with_context(|| format!("reading {}", path.display()))?;
    if rep.missing_comments + rep.bad_comments > 0 {
        log::warn!(
            "{}: {} packet(s) without a readable label were taken as BENIGN",
            path.display(),
            rep.missing_comments + rep.bad_comments
        );
    }
    let scenario = path.parent().and_then(|d| RunManifest::read(d).ok()).map(|m| m.scenario);
    let file = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((set, InputFile { file, scenario, sha256: sha256_hex(&bytes) }))
}

pub fn run(a: &Args) -> Result<(), Failure> {
    let kind: DetectorKind = a.detector.parse().map_err(Failure::usage)?;
    let filter: StreamFilter = a.filter.parse().map_err(Failure::usage)?;
    let mut params = Params::default();
    for term in &a.params {
        params.parse_term(term).map_err(Failure::usage)?;
    }
    params.check(kind).map_err(Failure::usage)?;

    let name = a
        .out
        .file_name()
        .ok_or_else(|| Failure::usage(anyhow!("--out must name a directory")))?
        .to_string_lossy()
        .into_owned();
    let root = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut entry = EntryWriter::create(root, &name)?;

    let (train, train_file) = load(&a.train)?;
    let (test, test_file) = load(&a.test)?;
    let ev = run_evaluation(&train, &test, &filter, kind, &params, a.seed, &WindowConfig::default()).map_err(
        |e| match e {
            NadsError::BadParam { .. } | NadsError::UnknownParam { .. } => Failure::usage(e),
            other => other.into(),
        },
    )?;

    let record = EvaluationRecord {
        detector: kind,
        params,
        filter: filter.to_string(),
        seed: a.seed,
        train: train_file,
        test: test_file,
        training_windows: ev.training_windows,
        test_windows: ev.trace.len(),
        threshold: ev.model.threshold(),
        report: ev.report,
    };
    let mut json = serde_json::to_string_pretty(&record)?;
    json.push('\n');
    entry.add(EVALUATION_FILE, json.as_bytes())?;
    let mut buf = Vec::new();
    ev.report.write_csv(&mut buf)?;
    entry.add("evaluation.csv", &buf)?;
    buf.clear();
    write_trace_csv(&ev.trace, &mut buf)?;
    entry.add("windows.csv", &buf)?;
    let mut model = serde_json::to_string(&ev.model)?;
    model.push('\n');
    entry.add("model.json", model.as_bytes())?;
    let dir = entry.finish()?;

    println!("{}", tsn_nads::nads::eval::REPORT_HEADER);
    println!("{}", ev.report.csv_row());
    log::info!("wrote {}", dir.display());
    Ok(())
}
