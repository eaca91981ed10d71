//! Bounded-offset local clocks standing in for gPTP.
//!
//! At every sync boundary `k * sync_interval` a node's offset is reset to a
//! seed-determined value within `±bound`; between syncs it drifts linearly.

use crate::rng::unit_at;
use crate::Nanos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClockModel {
    /// Drift in parts per billion; 50 ppm is 50_000.
    pub drift_ppb: i64,
    pub sync_interval_ns: Nanos,
    pub post_sync_offset_bound_ns: Nanos,
    /// Key of the per-sync offset sequence.
    pub key: u64,
}

impl ClockModel {
    pub fn perfect() -> Self {
        ClockModel { drift_ppb: 0, sync_interval_ns: 1, post_sync_offset_bound_ns: 0, key: 0 }
    }

    pub fn is_perfect(&self) -> bool {
        self.drift_ppb == 0 && self.post_sync_offset_bound_ns == 0
    }

    /// Offset right after sync `k`.
    pub fn sync_offset(&self, k: u64) -> i64 {
        let b = self.post_sync_offset_bound_ns as i64;
        if b == 0 {
            return 0;
        }
        let u = unit_at(self.key, k);
        // Uniform integer in [-b, b].
        (u * (2 * b + 1) as f64).floor() as i64 - b
    }

    /// Local reading at true time `t`.
    pub fn local_time(&self, t: Nanos) -> i64 {
        if self.is_perfect() {
            return t as i64;
        }
        let k = t / self.sync_interval_ns;
        let since = (t - k * self.sync_interval_ns) as i128;
        let drift = (self.drift_ppb as i128 * since).div_euclid(1_000_000_000) as i64;
        t as i64 + self.sync_offset(k) + drift
    }

    /// Earliest true time `>= from` at which the local clock reads `>= local`.
    pub fn true_time_at(&self, from: Nanos, local: i64) -> Nanos {
        if self.is_perfect() {
            return from.max(local.max(0) as u64);
        }
        let mut t = from;
        loop {
            let now = self.local_time(t);
            if now >= local {
                return t;
            }
            let seg_end = (t / self.sync_interval_ns + 1) * self.sync_interval_ns;
            let gap = (local - now) as i128;
            let rate = 1_000_000_000i128 + self.drift_ppb as i128;
            let mut x = t + ((gap * 1_000_000_000).div_euclid(rate) as u64).max(1);
            if x >= seg_end {
                t = seg_end;
                continue;
            }
            while x < seg_end && self.local_time(x) < local {
                x += 1;
            }
            if x >= seg_end {
                t = seg_end;
                continue;
            }
            while x > t && self.local_time(x - 1) >= local {
                x -= 1;
            }
            return x;
        }
    }

    /// Worst-case |local - true| over a sync period.
    pub fn error_bound(&self) -> Nanos {
        self.post_sync_offset_bound_ns
            + (self.drift_ppb.unsigned_abs() as u128 * self.sync_interval_ns as u128).div_ceil(1_000_000_000) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(ppb: i64, bound: u64) -> ClockModel {
        ClockModel { drift_ppb: ppb, sync_interval_ns: 125_000_000, post_sync_offset_bound_ns: bound, key: 99 }
    }

    #[test]
    fn perfect_clock_is_identity() {
        let c = model(0, 0);
        for t in [0, 1, 999, 125_000_000, 7_777_777_777] {
            assert_eq!(c.local_time(t), t as i64);
            assert_eq!(c.true_time_at(0, t as i64), t);
        }
    }

    #[test]
    fn linear_drift_after_sync() {
        let c = model(50_000, 0);
        assert_eq!(c.local_time(1_000_000) - 1_000_000, 50);
        assert_eq!(c.local_time(125_000_000 + 1_000_000) - 126_000_000, 50);
    }

    #[test]
    fn offsets_stay_in_bound() {
        let c = model(-1_000, 500);
        for k in 0..10_000 {
            assert!(c.sync_offset(k).abs() <= 500);
        }
        let mut seen_neg = false;
        let mut seen_pos = false;
        for k in 0..100 {
            seen_neg |= c.sync_offset(k) < 0;
            seen_pos |= c.sync_offset(k) > 0;
        }
        assert!(seen_neg && seen_pos);
    }

    #[test]
    fn inverse_is_earliest() {
        let c = model(37_000, 900);
        for target in [5_000i64, 124_999_000, 125_000_100, 250_000_321, 3_000_000_007] {
            let t = c.true_time_at(0, target);
            assert!(c.local_time(t) >= target);
            if t > 0 {
                assert!(c.local_time(t - 1) < target || (t % c.sync_interval_ns == 0));
            }
        }
        // Never earlier than `from`.
        assert_eq!(c.true_time_at(10_000, 0), 10_000);
    }
}
