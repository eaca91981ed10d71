//! Filter, window, train, score, evaluate.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::detect::{score_windows, train_detector, DetectorKind, Params, TrainedModel};
use super::eval::{evaluate, EvalReport};
use super::filter::{filter_stream, StreamFilter};
use super::metrics::{compute_window_metrics, MetricWindow, Truth, WindowConfig};
use super::NadsError;
use crate::dataset::CaptureSet;
use crate::Nanos;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTrace {
    pub start: Nanos,
    pub real_length: Nanos,
    pub features: [f64; 4],
    pub packets: u64,
    pub truth: Truth,
    pub prediction: Truth,
}

pub const TRACE_HEADER: &str =
    "start_ns,real_length_ns,bandwidth_bps,avg_frame_size,avg_frame_gap_ns,avg_cycle_jitter_ns,packets,truth,prediction";

pub fn write_trace_csv<W: Write>(trace: &[WindowTrace], mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for t in trace {
        let f = t.features;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            t.start,
            t.real_length,
            f[0],
            f[1],
            f[2],
            f[3],
            t.packets,
            t.truth.as_str(),
            t.prediction.as_str()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub model: TrainedModel,
    pub training_windows: usize,
    pub trace: Vec<WindowTrace>,
}

/// Windows of the packets `filter` selects from `set`.
pub fn stream_windows(set: &CaptureSet, filter: &StreamFilter, cfg: &WindowConfig) -> Vec<MetricWindow> {
    compute_window_metrics(&filter_stream(set, filter), cfg)
}

/// Trains on the filtered training capture and scores the filtered test
/// capture.
#[allow(clippy::too_many_arguments)]
pub fn run_evaluation(
    train: &CaptureSet,
    test: &CaptureSet,
    filter: &StreamFilter,
    kind: DetectorKind,
    params: &Params,
    seed: u64,
    windows: &WindowConfig,
) -> Result<Evaluation, NadsError> {
    params.check(kind)?;
    let train_packets = filter_stream(train, filter);
    if train_packets.is_empty() {
        return Err(NadsError::EmptyTraining);
    }
    let train_w = compute_window_metrics(&train_packets, windows);
    let model = train_detector(kind, &train_w, params, seed)?;
    let test_w = stream_windows(test, filter, windows);
    let pred = score_windows(&model, &test_w);
    let truth: Vec<Truth> = test_w.iter().map(|w| w.ground_truth).collect();
    let report = evaluate(&pred, &truth)?;
    let trace = test_w
        .iter()
        .zip(&pred)
        .map(|(w, &p)| WindowTrace {
            start: w.start,
            real_length: w.real_length,
            features: w.features(),
            packets: w.packet_count,
            truth: w.ground_truth,
            prediction: p,
        })
        .collect();
    Ok(Evaluation { report, model, training_windows: train_w.len(), trace })
}
