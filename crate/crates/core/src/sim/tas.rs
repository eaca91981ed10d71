//! Time-aware shaper gate schedules.

use thiserror::Error;

use crate::Nanos;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TasError {
    #[error("PCP {pcp} has no open interval")]
    NeverOpen { pcp: u8 },
    #[error("a {tx_ns} ns transmission does not fit any open interval of PCP {pcp} (longest {longest_ns} ns)")]
    Unschedulable { pcp: u8, tx_ns: Nanos, longest_ns: Nanos },
    #[error("interval [{0}, {1}) is not inside the cycle")]
    BadInterval(Nanos, Nanos),
}

/// Repeating per-PCP gate control list. A PCP without an entry is always
/// open. Times are in the port owner's local clock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateSchedule {
    pub cycle_ns: Nanos,
    pub hop_offset_ns: Nanos,
    open: [Option<Vec<(Nanos, Nanos)>>; 8],
    /// Maximal open spans; a span may run past the cycle end when the gate
    /// stays open across the boundary.
    spans: [Vec<(Nanos, Nanos)>; 8],
}

impl GateSchedule {
    pub fn always_open(cycle_ns: Nanos) -> Self {
        GateSchedule { cycle_ns, hop_offset_ns: 0, open: Default::default(), spans: Default::default() }
    }

    /// Sets the open intervals of `pcp`. Intervals are sorted and merged.
    pub fn set_open(&mut self, pcp: u8, intervals: &[(Nanos, Nanos)]) -> Result<(), TasError> {
        let mut iv: Vec<(Nanos, Nanos)> = Vec::with_capacity(intervals.len());
        for &(a, b) in intervals {
            if a >= b || b > self.cycle_ns {
                return Err(TasError::BadInterval(a, b));
            }
            iv.push((a, b));
        }
        iv.sort_unstable();
        let mut merged: Vec<(Nanos, Nanos)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let p = usize::from(pcp);
        if merged == [(0, self.cycle_ns)] {
            self.open[p] = None;
            self.spans[p].clear();
            return Ok(());
        }
        let mut spans = merged.clone();
        if spans.len() > 1 && spans[0].0 == 0 && spans.last().is_some_and(|l| l.1 == self.cycle_ns) {
            let first = spans.remove(0);
            spans.last_mut().expect("len > 1").1 = self.cycle_ns + first.1;
        }
        self.open[p] = Some(merged);
        self.spans[p] = spans;
        Ok(())
    }

    /// Open intervals of `pcp` within `[0, cycle)`, or `None` if always open.
    pub fn open_intervals(&self, pcp: u8) -> Option<&[(Nanos, Nanos)]> {
        self.open[usize::from(pcp)].as_deref()
    }

    pub fn is_gated(&self, pcp: u8) -> bool {
        self.open[usize::from(pcp)].is_some()
    }

    pub fn longest_span(&self, pcp: u8) -> Option<Nanos> {
        self.open[usize::from(pcp)].as_ref()?;
        Some(self.spans[usize::from(pcp)].iter().map(|s| s.1 - s.0).max().unwrap_or(0))
    }

    pub fn is_open(&self, pcp: u8, t: Nanos) -> bool {
        match &self.open[usize::from(pcp)] {
            None => true,
            Some(iv) => {
                let ph = t % self.cycle_ns;
                iv.iter().any(|&(a, b)| a <= ph && ph < b)
            }
        }
    }

    /// Open time of `pcp` in `[0, t)`.
    fn open_before(&self, pcp: u8, t: Nanos) -> Nanos {
        match &self.open[usize::from(pcp)] {
            None => t,
            Some(iv) => {
                let per_cycle: Nanos = iv.iter().map(|(a, b)| b - a).sum();
                let ph = t % self.cycle_ns;
                let partial: Nanos = iv.iter().map(|&(a, b)| b.min(ph).saturating_sub(a)).sum();
                (t / self.cycle_ns) * per_cycle + partial
            }
        }
    }

    /// Open time of `pcp` in `[a, b)`.
    pub fn open_time_between(&self, pcp: u8, a: Nanos, b: Nanos) -> Nanos {
        if b <= a {
            return 0;
        }
        self.open_before(pcp, b) - self.open_before(pcp, a)
    }
}

/// Earliest `t >= ready_at` such that `[t, t + tx)` lies in one open span of
/// `pcp` (guard-band rule: a frame that cannot finish before the gate closes
/// waits for the next opening).
pub fn tas_gate_transmit_time(sched: &GateSchedule, pcp: u8, ready_at: Nanos, tx_ns: Nanos) -> Result<Nanos, TasError> {
    let p = usize::from(pcp);
    if sched.open[p].is_none() {
        return Ok(ready_at);
    }
    let spans = &sched.spans[p];
    if spans.is_empty() {
        return Err(TasError::NeverOpen { pcp });
    }
    let longest = spans.iter().map(|s| s.1 - s.0).max().unwrap_or(0);
    if tx_ns > longest {
        return Err(TasError::Unschedulable { pcp, tx_ns, longest_ns: longest });
    }
    let c = sched.cycle_ns;
    let k0 = (ready_at / c).saturating_sub(1);
    for k in k0..=k0 + 3 {
        for &(a, b) in spans {
            let (a, b) = (k * c + a, k * c + b);
            if b <= ready_at {
                continue;
            }
            let start = a.max(ready_at);
            if start + tx_ns <= b {
                return Ok(start);
            }
        }
    }
    unreachable!("a fitting span recurs every cycle")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(a: Nanos, b: Nanos) -> GateSchedule {
        let mut g = GateSchedule::always_open(1_000_000);
        g.set_open(6, &[(a, b)]).unwrap();
        g
    }

    #[test]
    fn waits_for_window() {
        let g = window(30_000, 40_000);
        assert_eq!(tas_gate_transmit_time(&g, 6, 0, 1_000), Ok(30_000));
        assert_eq!(tas_gate_transmit_time(&g, 6, 32_000, 1_000), Ok(32_000));
        assert_eq!(tas_gate_transmit_time(&g, 6, 39_500, 1_000), Ok(1_030_000));
        assert_eq!(tas_gate_transmit_time(&g, 6, 39_000, 1_000), Ok(39_000));
        assert_eq!(tas_gate_transmit_time(&g, 5, 39_500, 1_000), Ok(39_500));
    }

    #[test]
    fn too_long_is_unschedulable() {
        let g = window(30_000, 40_000);
        assert!(matches!(tas_gate_transmit_time(&g, 6, 0, 10_001), Err(TasError::Unschedulable { .. })));
    }

    #[test]
    fn wrapping_span_is_contiguous() {
        let mut g = GateSchedule::always_open(1_000);
        g.set_open(5, &[(0, 100), (900, 1_000)]).unwrap();
        // 150 ns frame fits across the boundary: [950, 1100).
        assert_eq!(tas_gate_transmit_time(&g, 5, 950, 150), Ok(950));
        assert_eq!(tas_gate_transmit_time(&g, 5, 50, 100), Ok(900));
        assert_eq!(g.longest_span(5), Some(200));
    }

    #[test]
    fn full_cycle_means_ungated() {
        let mut g = GateSchedule::always_open(1_000);
        g.set_open(3, &[(0, 500), (500, 1_000)]).unwrap();
        assert!(!g.is_gated(3));
        assert!(g.set_open(3, &[(10, 1_001)]).is_err());
    }

    #[test]
    fn open_time_integrates() {
        let g = window(30_000, 40_000);
        assert_eq!(g.open_time_between(6, 0, 1_000_000), 10_000);
        assert_eq!(g.open_time_between(6, 35_000, 2_035_000), 20_000);
        assert_eq!(g.open_time_between(5, 35_000, 2_035_000), 2_000_000);
    }
}
