//! Flat-kernel mean-shift clustering. A point is benign when it lies within
//! `radius * scale` of some cluster centre, where the radius is the largest
//! distance of a training member to its centre.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanShift {
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub bandwidth: f64,
    pub scale: f64,
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Median of all pairwise distances; falls back to the largest distance,
/// then to 1, when the median is zero.
pub fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(dist(&x[i], &x[j]));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let n = d.len();
    let med = if n % 2 == 1 { d[n / 2] } else { (d[n / 2 - 1] + d[n / 2]) / 2.0 };
    if med > 0.0 {
        med
    } else if d[n - 1] > 0.0 {
        d[n - 1]
    } else {
        1.0
    }
}

impl MeanShift {
    pub fn fit(x: &[Vec<f64>], bandwidth: Option<f64>, scale: f64, max_iter: usize) -> MeanShift {
        let bw = bandwidth.unwrap_or_else(|| median_pairwise_distance(x));
        let dims = x[0].len();
        // (mode, points within bandwidth of it, seed index)
        let mut modes: Vec<(Vec<f64>, usize, usize)> = Vec::with_capacity(x.len());
        for (si, seed) in x.iter().enumerate() {
            let mut cur = seed.clone();
            let mut support = 0;
            for _ in 0..max_iter {
                let mut sum = vec![0.0; dims];
                let mut n = 0usize;
                for p in x {
                    if dist(p, &cur) <= bw {
                        for (s, v) in sum.iter_mut().zip(p) {
                            *s += v;
                        }
                        n += 1;
                    }
                }
                if n == 0 {
                    break;
                }
                support = n;
                let next: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
                let shift = dist(&next, &cur);
                cur = next;
                if shift < 1e-3 * bw {
                    break;
                }
            }
            modes.push((cur, support, si));
        }
        modes.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let mut centers: Vec<Vec<f64>> = Vec::new();
        for (m, _, _) in modes {
            if !centers.iter().any(|c| dist(c, &m) < bw) {
                centers.push(m);
            }
        }
        let mut radii = vec![0.0f64; centers.len()];
        let mut used = vec![false; centers.len()];
        for p in x {
            let (ci, d) = nearest(&centers, p);
            radii[ci] = radii[ci].max(d);
            used[ci] = true;
        }
        let mut keep = used.iter();
        centers.retain(|_| *keep.next().expect("same length"));
        let mut keep = used.iter();
        radii.retain(|_| *keep.next().expect("same length"));
        MeanShift { centers, radii, bandwidth: bw, scale }
    }

    /// Smallest `distance / radius` over clusters. Training points score at
    /// most 1.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(c, &r)| {
                let d = dist(c, x);
                if d == 0.0 {
                    0.0
                } else if r == 0.0 {
                    f64::INFINITY
                } else {
                    d / r
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_benign(&self, x: &[f64]) -> bool {
        self.score(x) <= self.scale
    }
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = dist(c, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::site_rng;
    use rand::Rng;

    fn blobs() -> Vec<Vec<f64>> {
        let mut r = site_rng(5, "blobs");
        let mut v = Vec::new();
        for c in [[0.1, 0.1], [0.9, 0.8]] {
            for _ in 0..40 {
                v.push(vec![c[0] + r.gen_range(-0.05..0.05), c[1] + r.gen_range(-0.05..0.05)]);
            }
        }
        v
    }

    #[test]
    fn finds_two_clusters() {
        let m = MeanShift::fit(&blobs(), Some(0.3), 1.0, 300);
        assert_eq!(m.centers.len(), 2);
    }

    #[test]
    fn training_set_is_benign_and_far_point_is_not() {
        let x = blobs();
        let m = MeanShift::fit(&x, None, 1.0, 300);
        assert!(x.iter().all(|p| m.is_benign(p)));
        assert!(!m.is_benign(&[5.0, -5.0]));
    }
}
