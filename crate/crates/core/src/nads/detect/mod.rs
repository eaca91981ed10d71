//! Detector training and scoring behind one interface.

pub mod autoencoder;
pub mod hbos;
pub mod iforest;
pub mod mean_shift;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{MetricWindow, Truth};
use super::normalize::MinMax;
use super::NadsError;

pub use autoencoder::Autoencoder;
pub use hbos::Hbos;
pub use iforest::IsolationForest;
pub use mean_shift::MeanShift;

pub const MIN_TRAINING_WINDOWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Autoencoder,
    MeanShift,
    IsolationForest,
    Hbos,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] =
        [DetectorKind::Autoencoder, DetectorKind::MeanShift, DetectorKind::IsolationForest, DetectorKind::Hbos];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Autoencoder => "autoencoder",
            DetectorKind::MeanShift => "mean_shift",
            DetectorKind::IsolationForest => "isolation_forest",
            DetectorKind::Hbos => "hbos",
        }
    }

    /// Parameter names the kind accepts.
    pub fn params(self) -> &'static [&'static str] {
        match self {
            DetectorKind::Autoencoder => &["learning_rate", "epochs", "hidden", "code", "percentile", "threshold_scale"],
            DetectorKind::MeanShift => &["bandwidth", "scale", "max_iter"],
            DetectorKind::IsolationForest => &["trees", "max_samples", "contamination"],
            DetectorKind::Hbos => &["bins", "contamination"],
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DetectorKind {
    type Err = NadsError;

    fn from_str(s: &str) -> Result<Self, NadsError> {
        match s {
            "autoencoder" => Ok(DetectorKind::Autoencoder),
            "mean_shift" | "meanshift" => Ok(DetectorKind::MeanShift),
            "isolation_forest" | "iforest" => Ok(DetectorKind::IsolationForest),
            "hbos" => Ok(DetectorKind::Hbos),
            _ => Err(NadsError::UnknownDetector(s.to_string())),
        }
    }
}

/// `key=value` detector parameters as given on the command line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params(pub BTreeMap<String, String>);

impl Params {
    pub fn set(mut self, key: &str, value: impl ToString) -> Self {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    /// Parses one `key=value` term.
    pub fn parse_term(&mut self, term: &str) -> Result<(), NadsError> {
        let (k, v) = term
            .split_once('=')
            .ok_or_else(|| NadsError::BadParam { key: term.to_string(), value: String::new() })?;
        self.0.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    /// Rejects keys the kind does not accept and values that do not parse
    /// or are out of range.
    pub fn check(&self, kind: DetectorKind) -> Result<(), NadsError> {
        for k in self.0.keys() {
            if !kind.params().contains(&k.as_str()) {
                return Err(NadsError::UnknownParam {
                    kind: kind.as_str(),
                    key: k.clone(),
                    accepted: kind.params().join(", "),
                });
            }
        }
        settings(kind, self).map(|_| ())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, NadsError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| NadsError::BadParam { key: key.to_string(), value: v.clone() }),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, NadsError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModel {
    Autoencoder(Autoencoder),
    MeanShift(MeanShift),
    IsolationForest(IsolationForest),
    Hbos(Hbos),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: DetectorKind,
    pub normalization: MinMax,
    pub detector: DetectorModel,
}

impl TrainedModel {
    /// Anomaly score of raw features; higher is more anomalous.
    pub fn score(&self, features: &[f64; 4]) -> f64 {
        let x = self.normalization.transform(features);
        match &self.detector {
            DetectorModel::Autoencoder(m) => m.score(&x),
            DetectorModel::MeanShift(m) => m.score(&x),
            DetectorModel::IsolationForest(m) => m.score(&x),
            DetectorModel::Hbos(m) => m.score(&x),
        }
    }

    pub fn threshold(&self) -> f64 {
        match &self.detector {
            DetectorModel::Autoencoder(m) => m.threshold,
            DetectorModel::MeanShift(m) => m.scale,
            DetectorModel::IsolationForest(m) => m.threshold,
            DetectorModel::Hbos(m) => m.threshold,
        }
    }

    pub fn predict(&self, features: &[f64; 4]) -> Truth {
        if self.score(features) > self.threshold() {
            Truth::Abnormal
        } else {
            Truth::Benign
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64, NadsError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(NadsError::BadParam { key: key.into(), value: v.to_string() })
    }
}

fn fraction(key: &str, v: f64) -> Result<f64, NadsError> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(NadsError::BadParam { key: key.into(), value: v.to_string() })
    }
}

fn count(key: &str, v: usize) -> Result<usize, NadsError> {
    if v > 0 {
        Ok(v)
    } else {
        Err(NadsError::BadParam { key: key.into(), value: v.to_string() })
    }
}

/// Parameter values with defaults filled in.
enum Settings {
    Autoencoder(autoencoder::TrainConfig),
    MeanShift { bandwidth: Option<f64>, scale: f64, max_iter: usize },
    IsolationForest { trees: usize, max_samples: usize, contamination: f64 },
    Hbos { bins: usize, contamination: f64 },
}

fn settings(kind: DetectorKind, params: &Params) -> Result<Settings, NadsError> {
    Ok(match kind {
        DetectorKind::Autoencoder => Settings::Autoencoder(autoencoder::TrainConfig {
            learning_rate: positive("learning_rate", params.get_or("learning_rate", 1e-3)?)?,
            epochs: count("epochs", params.get_or("epochs", 3)?)?,
            hidden: count("hidden", params.get_or("hidden", 32)?)?,
            code: count("code", params.get_or("code", 4)?)?,
            percentile: positive("percentile", params.get_or("percentile", 99.0)?)?.min(100.0),
            threshold_scale: positive("threshold_scale", params.get_or("threshold_scale", 1.0)?)?,
        }),
        DetectorKind::MeanShift => Settings::MeanShift {
            bandwidth: params.get::<f64>("bandwidth")?.map(|b| positive("bandwidth", b)).transpose()?,
            scale: positive("scale", params.get_or("scale", 1.1)?)?,
            max_iter: count("max_iter", params.get_or("max_iter", 300)?)?,
        },
        DetectorKind::IsolationForest => Settings::IsolationForest {
            trees: count("trees", params.get_or("trees", 100)?)?,
            max_samples: count("max_samples", params.get_or("max_samples", 256)?)?,
            contamination: fraction("contamination", params.get_or("contamination", 0.1)?)?,
        },
        DetectorKind::Hbos => Settings::Hbos {
            bins: count("bins", params.get_or("bins", 10)?)?,
            contamination: fraction("contamination", params.get_or("contamination", 0.1)?)?,
        },
    })
}

/// Fits normalization and the detector on training windows (assumed
/// benign).
pub fn train_detector(
    kind: DetectorKind,
    windows: &[MetricWindow],
    params: &Params,
    seed: u64,
) -> Result<TrainedModel, NadsError> {
    params.check(kind)?;
    if windows.len() < MIN_TRAINING_WINDOWS {
        return Err(NadsError::TooFewWindows { need: MIN_TRAINING_WINDOWS, got: windows.len() });
    }
    let rows: Vec<[f64; 4]> = windows.iter().map(|w| w.features()).collect();
    let normalization = MinMax::fit(&rows);
    if normalization.dims() == 0 {
        return Err(NadsError::NoFeatures);
    }
    let x: Vec<Vec<f64>> = rows.iter().map(|r| normalization.transform(r)).collect();
    let detector = match settings(kind, params)? {
        Settings::Autoencoder(cfg) => DetectorModel::Autoencoder(Autoencoder::train(&x, &cfg, seed)),
        Settings::MeanShift { bandwidth, scale, max_iter } => {
            DetectorModel::MeanShift(MeanShift::fit(&x, bandwidth, scale, max_iter))
        }
        Settings::IsolationForest { trees, max_samples, contamination } => {
            DetectorModel::IsolationForest(IsolationForest::fit(&x, trees, max_samples, contamination, seed))
        }
        Settings::Hbos { bins, contamination } => DetectorModel::Hbos(Hbos::fit(&x, bins, contamination)),
    };
    Ok(TrainedModel { kind, normalization, detector })
}

pub fn score_windows(model: &TrainedModel, windows: &[MetricWindow]) -> Vec<Truth> {
    windows.iter().map(|w| model.predict(&w.features())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse() {
        for k in DetectorKind::ALL {
            assert_eq!(k.as_str().parse::<DetectorKind>().unwrap(), k);
        }
        let e = "unknown".parse::<DetectorKind>().unwrap_err();
        assert!(e.to_string().contains("mean_shift"));
    }

    #[test]
    fn params_are_checked() {
        let p = Params::default().set("bins", 5);
        assert!(p.check(DetectorKind::Hbos).is_ok());
        assert!(matches!(p.check(DetectorKind::MeanShift), Err(NadsError::UnknownParam { .. })));
        let bad = Params::default().set("bins", "many");
        assert!(matches!(bad.get::<usize>("bins"), Err(NadsError::BadParam { .. })));
    }
}
