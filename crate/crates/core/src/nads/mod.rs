//! Network anomaly detection pipeline: stream filtering, windowed metrics,
//! interchangeable detectors and confusion-matrix scoring.

pub mod detect;
pub mod eval;
pub mod filter;
pub mod metrics;
pub mod normalize;
pub mod pipeline;

use thiserror::Error;

pub use detect::{score_windows, train_detector, DetectorKind, DetectorModel, Params, TrainedModel};
pub use eval::{evaluate, EvalReport};
pub use filter::{filter_stream, FilterError, StreamFilter};
pub use metrics::{compute_window_metrics, derive_ground_truth, Closure, MetricWindow, Truth, WindowConfig};
pub use normalize::MinMax;
pub use pipeline::{run_evaluation, Evaluation, WindowTrace};

#[derive(Debug, Error, PartialEq)]
pub enum NadsError {
    #[error("unknown detector {0:?} (expected one of: autoencoder, mean_shift, isolation_forest, hbos)")]
    UnknownDetector(String),
    #[error("unknown parameter {key:?} for {kind} (accepted: {accepted})")]
    UnknownParam { kind: &'static str, key: String, accepted: String },
    #[error("invalid value {value:?} for parameter {key}")]
    BadParam { key: String, value: String },
    #[error("the filtered training set is empty")]
    EmptyTraining,
    #[error("training needs at least {need} windows, got {got}")]
    TooFewWindows { need: usize, got: usize },
    #[error("every feature is constant in the training data")]
    NoFeatures,
    #[error("{0} predictions but {1} truth values")]
    LengthMismatch(usize, usize),
}

/// Linear-interpolation quantile of `sorted` (ascending) at `q` in [0, 1].
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub(crate) fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.9), 4.6);
    }
}
