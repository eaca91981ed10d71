//! Isolation forest with score `s(x) = 2^(-E[h(x)] / c(psi))`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nads::{quantile, sorted};
use crate::rng::site_rng;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful binary-search-tree lookup among
/// `n` points.
pub fn c_factor(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum INode {
    Leaf { size: usize },
    /// Points with `x[feature] <= value` go left.
    Split { feature: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<Vec<INode>>,
    pub sample_size: usize,
    pub contamination: f64,
    pub threshold: f64,
}

fn grow<R: Rng>(x: &[Vec<f64>], idx: Vec<usize>, depth: usize, limit: usize, rng: &mut R, nodes: &mut Vec<INode>) -> usize {
    let me = nodes.len();
    nodes.push(INode::Leaf { size: idx.len() });
    if idx.len() <= 1 || depth >= limit {
        return me;
    }
    let dims = x[idx[0]].len();
    let spread: Vec<(usize, f64, f64)> = (0..dims)
        .filter_map(|f| {
            let lo = idx.iter().map(|&i| x[i][f]).fold(f64::INFINITY, f64::min);
            let hi = idx.iter().map(|&i| x[i][f]).fold(f64::NEG_INFINITY, f64::max);
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if spread.is_empty() {
        return me;
    }
    let (feature, lo, hi) = spread[rng.gen_range(0..spread.len())];
    let value = rng.gen_range(lo..hi);
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| x[i][feature] <= value);
    let left = grow(x, l, depth + 1, limit, rng, nodes);
    let right = grow(x, r, depth + 1, limit, rng, nodes);
    nodes[me] = INode::Split { feature, value, left, right };
    me
}

impl IsolationForest {
    /// Each tree draws from its own seeded stream, so trees could be built
    /// in any order.
    pub fn fit(x: &[Vec<f64>], trees: usize, max_samples: usize, contamination: f64, seed: u64) -> IsolationForest {
        let psi = max_samples.min(x.len()).max(1);
        let limit = (psi as f64).log2().ceil() as usize;
        let trees = (0..trees)
            .map(|t| {
                let mut rng = site_rng(seed, &format!("iforest.tree.{t}"));
                let idx = sample(&mut rng, x.len(), psi).into_vec();
                let mut nodes = Vec::new();
                grow(x, idx, 0, limit, &mut rng, &mut nodes);
                nodes
            })
            .collect();
        let mut f = IsolationForest { trees, sample_size: psi, contamination, threshold: f64::INFINITY };
        let scores = sorted(x.iter().map(|p| f.score(p)).collect());
        f.threshold = quantile(&scores, 1.0 - contamination);
        f
    }

    pub fn path_length(tree: &[INode], x: &[f64]) -> f64 {
        let mut n = 0;
        let mut depth = 0.0;
        loop {
            match tree[n] {
                INode::Leaf { size } => return depth + c_factor(size),
                INode::Split { feature, value, left, right } => {
                    n = if x[feature] <= value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }

    pub fn mean_path_length(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| Self::path_length(t, x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn score_from_path(&self, mean_path: f64) -> f64 {
        2f64.powf(-mean_path / c_factor(self.sample_size).max(f64::MIN_POSITIVE))
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.score_from_path(self.mean_path_length(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(n: usize) -> Vec<Vec<f64>> {
        let mut r = site_rng(11, "data");
        (0..n).map(|_| vec![r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)]).collect()
    }

    #[test]
    fn c_factor_values() {
        assert_eq!(c_factor(1), 0.0);
        assert_eq!(c_factor(2), 1.0);
        assert!((c_factor(256) - 10.2448).abs() < 1e-3);
    }

    #[test]
    fn flags_about_contamination_on_training_data() {
        let x = data(500);
        let f = IsolationForest::fit(&x, 100, 256, 0.1, 3);
        let flagged = x.iter().filter(|p| f.score(p) > f.threshold).count() as f64 / x.len() as f64;
        assert!((flagged - 0.1).abs() <= 0.05, "{flagged}");
        assert!(f.score(&[5.0, 5.0]) > f.threshold);
    }

    #[test]
    fn deterministic_per_seed() {
        let x = data(100);
        assert_eq!(IsolationForest::fit(&x, 10, 256, 0.1, 1), IsolationForest::fit(&x, 10, 256, 0.1, 1));
    }
}
