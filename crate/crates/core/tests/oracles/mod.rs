//! Independent brute-force recomputations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsn_nads::anomaly::{LabelPair, PacketLabel};
use tsn_nads::dataset::LabeledPacket;
use tsn_nads::nads::detect::Hbos;
use tsn_nads::nads::eval::EvalReport;
use tsn_nads::nads::Truth;

/// One window as integers: members, bytes, gap sum, twice the jitter sum,
/// real length, and whether any member is not BENIGN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteWindow {
    pub start: u64,
    pub packets: u64,
    pub bytes: u64,
    pub gap_sum: u64,
    pub jitter2_sum: u64,
    pub real: u64,
    pub abnormal: bool,
}

impl BruteWindow {
    pub fn bandwidth(&self) -> f64 {
        if self.real == 0 {
            0.0
        } else {
            (self.bytes * 8) as f64 * 1e9 / self.real as f64
        }
    }
}

/// Windows with the trigger packet closing its window. A trailing window
/// that never reached its nominal end is dropped.
pub fn brute_windows(pkts: &[LabeledPacket], nominal: u64) -> Vec<BruteWindow> {
    let mut out = Vec::new();
    let mut members: Vec<&LabeledPacket> = Vec::new();
    for p in pkts {
        members.push(p);
        let open = members[0].ts;
        if members.len() > 1 && p.ts >= open + nominal {
            out.push(summarize(&members));
            members.clear();
        }
    }
    out
}

fn summarize(m: &[&LabeledPacket]) -> BruteWindow {
    let gaps: Vec<u64> = (1..m.len()).map(|i| m[i].ts - m[i - 1].ts).collect();
    let jitter2_sum = if gaps.is_empty() {
        0
    } else {
        let mut s = gaps.clone();
        s.sort();
        let twice_median = if s.len() % 2 == 1 { 2 * s[s.len() / 2] } else { s[s.len() / 2 - 1] + s[s.len() / 2] };
        gaps.iter().map(|&g| (2 * g).abs_diff(twice_median)).sum()
    };
    BruteWindow {
        start: m[0].ts,
        packets: m.len() as u64,
        bytes: m.iter().map(|p| p.frame.len() as u64).sum(),
        gap_sum: gaps.iter().sum(),
        jitter2_sum,
        real: m[m.len() - 1].ts - m[0].ts,
        abnormal: m.iter().any(|p| p.labels.packet != PacketLabel::Benign),
    }
}

/// Random time-ordered packets with occasional non-benign labels.
pub fn random_packets(seed: u64, n: usize) -> Vec<LabeledPacket> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = rng.gen_range(0..1_000_000u64);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        t += match rng.gen_range(0..10) {
            0 => 0,
            1 => rng.gen_range(50_000_000..250_000_000),
            _ => rng.gen_range(1..5_000_000),
        };
        let label = if rng.gen_bool(0.05) {
            PacketLabel::ALL[rng.gen_range(1..PacketLabel::ALL.len())]
        } else {
            PacketLabel::Benign
        };
        out.push(LabeledPacket {
            ts: t,
            frame: vec![0; rng.gen_range(64..1523)],
            labels: LabelPair::new(label, ""),
        });
    }
    out
}

/// HBOS score by explicit histogram lookup from the training data.
pub fn brute_hbos_score(train: &[Vec<f64>], bins: usize, x: &[f64]) -> f64 {
    let dims = train[0].len();
    let mut score = 0.0;
    for f in 0..dims {
        let lo = train.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
        let hi = train.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
        let bin = |v: f64| -> Option<usize> {
            if v < lo || v > hi {
                return None;
            }
            if hi == lo {
                return Some(0);
            }
            let pos = (v - lo) / (hi - lo) * bins as f64;
            // Last bin is closed on the right.
            (0..bins).find(|&k| pos < (k + 1) as f64).or(Some(bins - 1))
        };
        let mut counts = vec![0u64; bins];
        for r in train {
            counts[bin(r[f]).unwrap()] += 1;
        }
        let top = *counts.iter().max().unwrap() as f64;
        let smallest = counts.iter().filter(|&&c| c > 0).min().copied().unwrap() as f64 / top;
        let density = match bin(x[f]) {
            Some(k) if counts[k] > 0 => counts[k] as f64 / top,
            _ => smallest * 0.5,
        };
        score += (1.0 / density).ln();
    }
    score
}

pub fn hbos_matches_brute(h: &Hbos, train: &[Vec<f64>], x: &[f64]) -> bool {
    h.score(x) == brute_hbos_score(train, h.bins, x)
}

/// Confusion counts by direct enumeration.
pub fn hand_count(pred: &[Truth], truth: &[Truth]) -> (u64, u64, u64, u64) {
    let n = |p: Truth, t: Truth| pred.iter().zip(truth).filter(|(a, b)| **a == p && **b == t).count() as u64;
    (
        n(Truth::Abnormal, Truth::Abnormal),
        n(Truth::Abnormal, Truth::Benign),
        n(Truth::Benign, Truth::Benign),
        n(Truth::Benign, Truth::Abnormal),
    )
}

/// Prediction and truth vectors realizing the given confusion counts.
pub fn expand_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> (Vec<Truth>, Vec<Truth>) {
    let mut p = Vec::new();
    let mut t = Vec::new();
    for (n, pv, tv) in [
        (tp, Truth::Abnormal, Truth::Abnormal),
        (fp, Truth::Abnormal, Truth::Benign),
        (tn, Truth::Benign, Truth::Benign),
        (fn_, Truth::Benign, Truth::Abnormal),
    ] {
        p.extend(std::iter::repeat(pv).take(n));
        t.extend(std::iter::repeat(tv).take(n));
    }
    (p, t)
}

/// Known detector confusion matrices (tp, fp, tn, fn) with their
/// two-decimal precision and recall.
pub const REFERENCE_ROWS: [((usize, usize, usize, usize), &str, &str); 6] = [
    ((55, 6, 47, 0), "0.90", "1.00"),
    ((55, 0, 53, 0), "1.00", "1.00"),
    ((20, 8, 45, 35), "0.71", "0.36"),
    ((53, 4, 49, 2), "0.93", "0.96"),
    ((25, 8, 53, 3), "0.76", "0.89"),
    ((28, 10, 51, 0), "0.74", "1.00"),
];

pub fn report_matches_row(r: &EvalReport, row: &((usize, usize, usize, usize), &str, &str)) -> bool {
    let (tp, fp, tn, fn_) = row.0;
    (r.tp, r.fp, r.tn, r.fn_) == (tp as u64, fp as u64, tn as u64, fn_ as u64)
        && format!("{:.2}", r.precision.unwrap_or(f64::NAN)) == row.1
        && format!("{:.2}", r.recall.unwrap_or(f64::NAN)) == row.2
}

/// Relative error between the analytic and the central-difference gradient
/// of the autoencoder loss at one random parameter point.
pub fn autoencoder_gradient_error(seed: u64) -> f64 {
    use tsn_nads::nads::detect::Autoencoder;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ae = Autoencoder::new(4, 32, 4, &mut rng);
    let mut p = ae.params();
    // Move away from the initializer so biases are exercised too.
    for v in &mut p {
        *v += rng.gen_range(-0.1..0.1);
    }
    let mut ae = ae;
    ae.set_params(&p);
    let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
    let (_, g) = ae.loss_and_grad(&x);
    let h = 1e-6;
    let mut probe = ae.clone();
    let mut num = vec![0.0; p.len()];
    for i in 0..p.len() {
        let mut q = p.clone();
        q[i] += h;
        probe.set_params(&q);
        let up = probe.loss(&x);
        q[i] -= 2.0 * h;
        probe.set_params(&q);
        let down = probe.loss(&x);
        num[i] = (up - down) / (2.0 * h);
    }
    let diff = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
    diff / norm
}
