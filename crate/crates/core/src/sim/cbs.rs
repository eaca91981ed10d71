//! Credit-based shaper state.
//!
//! Credit is kept in bit-nanoseconds per second ("nanobits", bits x 1e9) so
//! that `slope [bit/s] * dt [ns]` is exact integer arithmetic.

use crate::Nanos;

pub const NANOBITS_PER_BIT: i128 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CreditState {
    pub credit_nb: i128,
    pub idle_slope_bps: u64,
    /// Always `idle_slope - link_rate`.
    pub send_slope_bps: i64,
    pub last_update: Nanos,
}

impl CreditState {
    pub fn new(idle_slope_bps: u64, link_rate_bps: u64) -> Self {
        CreditState {
            credit_nb: 0,
            idle_slope_bps,
            send_slope_bps: idle_slope_bps as i64 - link_rate_bps as i64,
            last_update: 0,
        }
    }

    pub fn with_credit_bits(mut self, bits: i64) -> Self {
        self.credit_nb = bits as i128 * NANOBITS_PER_BIT;
        self
    }

    pub fn credit_bits(&self) -> f64 {
        self.credit_nb as f64 / NANOBITS_PER_BIT as f64
    }

    /// Brings credit forward to `now`. `open_ns` is how long the class gate
    /// was open since the last update (credit is frozen while it is closed);
    /// `waiting` says whether frames were queued over that span.
    pub fn advance(&mut self, now: Nanos, open_ns: Nanos, waiting: bool) {
        if now <= self.last_update {
            return;
        }
        let gain = self.idle_slope_bps as i128 * open_ns as i128;
        if waiting {
            self.credit_nb += gain;
        } else if self.credit_nb < 0 {
            self.credit_nb = (self.credit_nb + gain).min(0);
        } else {
            self.credit_nb = 0;
        }
        self.last_update = now;
    }

    /// Gate-open time until credit is back at zero.
    pub fn wait_ns(&self) -> Nanos {
        if self.credit_nb >= 0 {
            return 0;
        }
        ((-self.credit_nb) as u128).div_ceil(self.idle_slope_bps as u128) as Nanos
    }

    /// Charges a transmission starting at `now`.
    pub fn start_tx(&mut self, now: Nanos, tx_ns: Nanos) {
        self.credit_nb += self.send_slope_bps as i128 * tx_ns as i128;
        self.last_update = now + tx_ns;
    }
}

/// Earliest time at or after `now` when a frame queued at `now` may start,
/// and the state right after it has been sent. The queue is taken as empty
/// before `now` and the gate as always open.
pub fn cbs_transmit_time(state: CreditState, now: Nanos, tx_ns: Nanos) -> (Nanos, CreditState) {
    let mut s = state;
    if s.last_update < now {
        s.advance(now, now - s.last_update, false);
    }
    let now = now.max(s.last_update);
    let start = now + s.wait_ns();
    s.advance(start, start - now, true);
    s.start_tx(start, tx_ns);
    (start, s)
}
