//! Per-feature min-max scaling learned from training windows.

use serde::{Deserialize, Serialize};

use super::metrics::FEATURE_NAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: [f64; 4],
    pub max: [f64; 4],
    /// Features with zero spread in training are left out.
    pub active: [bool; 4],
}

impl MinMax {
    pub fn fit(rows: &[[f64; 4]]) -> MinMax {
        let mut min = [f64::INFINITY; 4];
        let mut max = [f64::NEG_INFINITY; 4];
        for r in rows {
            for f in 0..4 {
                min[f] = min[f].min(r[f]);
                max[f] = max[f].max(r[f]);
            }
        }
        let mut active = [false; 4];
        for f in 0..4 {
            active[f] = max[f] > min[f];
            if !active[f] {
                log::warn!("feature {} has no spread in training data and is ignored", FEATURE_NAMES[f]);
            }
        }
        MinMax { min, max, active }
    }

    pub fn dims(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Scaled active features. Test values outside the training range are
    /// not clamped.
    pub fn transform(&self, x: &[f64; 4]) -> Vec<f64> {
        (0..4).filter(|&f| self.active[f]).map(|f| (x[f] - self.min[f]) / (self.max[f] - self.min[f])).collect()
    }
}
