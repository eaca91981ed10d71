//! Sequence recovery for redundant streams.

use std::collections::{HashSet, VecDeque};

/// Sliding history of accepted sequence numbers for one (stream, listener).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryState {
    history_length: usize,
    order: VecDeque<u64>,
    seen: HashSet<u64>,
}

impl RecoveryState {
    pub fn new(history_length: usize) -> Self {
        RecoveryState { history_length: history_length.max(1), order: VecDeque::new(), seen: HashSet::new() }
    }

    pub fn history_length(&self) -> usize {
        self.history_length
    }

    pub fn contains(&self, seq: u64) -> bool {
        self.seen.contains(&seq)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Accepts `seq` iff it is not in the history; accepted numbers enter the
/// history and the oldest entry is evicted beyond `history_length`.
pub fn frer_accept(state: &mut RecoveryState, seq: u64) -> bool {
    if state.seen.contains(&seq) {
        return false;
    }
    state.order.push_back(seq);
    state.seen.insert(seq);
    if state.order.len() > state.history_length {
        let old = state.order.pop_front().expect("non-empty");
        state.seen.remove(&old);
    }
    true
}
