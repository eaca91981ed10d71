//! Histogram-based outlier score.
//!
//! Each feature gets equal-width bins over its training range. Bin heights
//! are scaled so the fullest bin is 1. Values outside the range, and empty
//! bins, get half the smallest non-zero height. The score is
//! `sum_f ln(1 / density_f(x))`.

use serde::{Deserialize, Serialize};

use crate::nads::{quantile, sorted};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hbos {
    pub bins: usize,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Per feature, per bin.
    pub density: Vec<Vec<f64>>,
    /// Per feature density for out-of-range values and empty bins.
    pub floor: Vec<f64>,
    pub contamination: f64,
    pub threshold: f64,
}

impl Hbos {
    pub fn fit(x: &[Vec<f64>], bins: usize, contamination: f64) -> Hbos {
        let dims = x[0].len();
        let mut h = Hbos {
            bins,
            min: vec![f64::INFINITY; dims],
            max: vec![f64::NEG_INFINITY; dims],
            density: vec![vec![0.0; bins]; dims],
            floor: vec![0.0; dims],
            contamination,
            threshold: f64::INFINITY,
        };
        for p in x {
            for f in 0..dims {
                h.min[f] = h.min[f].min(p[f]);
                h.max[f] = h.max[f].max(p[f]);
            }
        }
        let mut counts = vec![vec![0u64; bins]; dims];
        for p in x {
            for (f, c) in counts.iter_mut().enumerate() {
                let b = h.bin_of(f, p[f]).expect("training values are in range");
                c[b] += 1;
            }
        }
        for f in 0..dims {
            let top = *counts[f].iter().max().expect("bins > 0") as f64;
            h.density[f] = counts[f].iter().map(|&c| c as f64 / top).collect();
            let smallest = h.density[f].iter().copied().filter(|&d| d > 0.0).fold(f64::INFINITY, f64::min);
            h.floor[f] = smallest * 0.5;
        }
        let scores = sorted(x.iter().map(|p| h.score(p)).collect());
        h.threshold = quantile(&scores, 1.0 - contamination);
        h
    }

    /// Bin of `v` for feature `f`, or `None` outside the training range.
    pub fn bin_of(&self, f: usize, v: f64) -> Option<usize> {
        let (lo, hi) = (self.min[f], self.max[f]);
        if !(lo..=hi).contains(&v) {
            return None;
        }
        if hi == lo {
            return Some(0);
        }
        let b = ((v - lo) / (hi - lo) * self.bins as f64).floor() as usize;
        Some(b.min(self.bins - 1))
    }

    pub fn density_of(&self, f: usize, v: f64) -> f64 {
        match self.bin_of(f, v) {
            Some(b) if self.density[f][b] > 0.0 => self.density[f][b],
            _ => self.floor[f],
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        (0..self.min.len()).map(|f| (1.0 / self.density_of(f, x[f])).ln()).sum()
    }
}
