//! Identifiers, quorum arithmetic and the constant-size vote history.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a node in `[0, n)`.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// View number. Views start at 0.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct View(pub u64);

impl View {
    pub const ZERO: View = View(0);

    pub fn next(self) -> View {
        View(self.0 + 1)
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque consensus value. The protocol only ever compares values for equality;
/// the total order exists for deterministic tie-breaking.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Value(pub u64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Position of a block in the multi-shot chain. Slot 0 is the genesis sentinel.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Slot(pub u64);

impl Slot {
    pub const GENESIS: Slot = Slot(0);

    pub fn next(self) -> Slot {
        Slot(self.0 + 1)
    }

    /// `self - k`, or `None` when that would go below genesis.
    pub fn back(self, k: u64) -> Option<Slot> {
        self.0.checked_sub(k).map(Slot)
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Simulated time in integer ticks.
pub type Ticks = u64;

/// The four voting phases of a view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    One,
    Two,
    Three,
    Four,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::One, Phase::Two, Phase::Three, Phase::Four];

    pub fn number(self) -> u8 {
        match self {
            Phase::One => 1,
            Phase::Two => 2,
            Phase::Three => 3,
            Phase::Four => 4,
        }
    }

    pub fn from_number(n: u8) -> Option<Phase> {
        match n {
            1 => Some(Phase::One),
            2 => Some(Phase::Two),
            3 => Some(Phase::Three),
            4 => Some(Phase::Four),
            _ => None,
        }
    }

    pub fn next(self) -> Option<Phase> {
        Phase::from_number(self.number() + 1)
    }

    fn index(self) -> usize {
        self.number() as usize - 1
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// System size and fault bound. Construction enforces `n > 3f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Params {
    n: usize,
    f: usize,
}

impl Params {
    pub fn new(n: usize, f: usize) -> Option<Params> {
        (n > 3 * f).then_some(Params { n, f })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    pub fn blocking(&self) -> usize {
        self.f + 1
    }

    pub fn is_quorum(&self, count: usize) -> bool {
        is_quorum(count, self.n, self.f)
    }

    pub fn is_blocking(&self, count: usize) -> bool {
        is_blocking(count, self.f)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n as u32).map(NodeId)
    }
}

/// `count` nodes form a quorum: at least `n - f` of them.
pub fn is_quorum(count: usize, n: usize, f: usize) -> bool {
    count + f >= n
}

/// `count` nodes form a blocking set: at least `f + 1` of them.
pub fn is_blocking(count: usize, f: usize) -> bool {
    count > f
}

/// A vote as remembered in a history or reported in suggest/proof messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VoteRecord {
    pub view: View,
    pub value: Value,
}

impl VoteRecord {
    pub fn new(view: View, value: Value) -> Self {
        VoteRecord { view, value }
    }
}

impl fmt::Display for VoteRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.view, self.value)
    }
}

/// The only state a node keeps across views: its highest vote of each phase,
/// plus for phases 1 and 2 the highest vote carrying a different value than
/// the highest one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoteHistory {
    highest: [Option<VoteRecord>; 4],
    prev: [Option<VoteRecord>; 2],
}

impl VoteHistory {
    /// Size of [`VoteHistory::to_bytes`]: six records of flag + view + value.
    pub const ENCODED_LEN: usize = 6 * 17;

    pub fn new() -> Self {
        Self::default()
    }

    pub fn highest(&self, phase: Phase) -> Option<VoteRecord> {
        self.highest[phase.index()]
    }

    /// Second-highest differing-value vote; always `None` for phases 3 and 4.
    pub fn prev(&self, phase: Phase) -> Option<VoteRecord> {
        match phase {
            Phase::One | Phase::Two => self.prev[phase.index()],
            _ => None,
        }
    }

    /// Remember that a vote of `phase` was sent for `value` in `view`.
    ///
    /// Well-behaved nodes vote in non-decreasing views and at most once per
    /// phase and view, so a lower view or a second value in the same view is a
    /// protocol bug and panics. Re-recording the current highest vote is a no-op.
    pub fn record(&mut self, phase: Phase, view: View, value: Value) {
        let idx = phase.index();
        let new = VoteRecord { view, value };
        if let Some(old) = self.highest[idx] {
            assert!(
                view >= old.view,
                "vote-{phase} recorded for view {view} below highest view {}",
                old.view
            );
            if old == new {
                return;
            }
            assert!(
                view > old.view,
                "second vote-{phase} value in view {view} ({} then {value})",
                old.value
            );
            if idx < 2 && old.value != value {
                // Every other differing-value vote sits below `old`, so `old`
                // is now the highest vote whose value differs from `value`.
                self.prev[idx] = Some(old);
            }
        }
        self.highest[idx] = Some(new);
    }

    /// Builder-style variant of [`VoteHistory::record`].
    pub fn with_vote(mut self, phase: Phase, view: View, value: Value) -> Self {
        self.record(phase, view, value);
        self
    }

    /// Fixed-width encoding of the persistent state. The length never depends on
    /// how many views have elapsed.
    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        let records = self.highest.iter().chain(self.prev.iter());
        for (chunk, rec) in out.chunks_exact_mut(17).zip(records) {
            if let Some(r) = rec {
                chunk[0] = 1;
                chunk[1..9].copy_from_slice(&r.view.0.to_le_bytes());
                chunk[9..17].copy_from_slice(&r.value.0.to_le_bytes());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: Value = Value(1);
    const B: Value = Value(2);

    #[test]
    fn quorum_examples() {
        assert!(is_quorum(3, 4, 1));
        assert!(!is_quorum(2, 4, 1));
        assert!(is_quorum(7, 10, 3));
    }

    #[test]
    fn blocking_examples() {
        assert!(is_blocking(2, 1));
        assert!(!is_blocking(1, 1));
        assert!(is_blocking(4, 3));
    }

    #[test]
    fn quorum_and_blocking_match_set_definitions() {
        // A quorum is any set that leaves at most f nodes outside; a blocking
        // set is any set that cannot consist of faulty nodes only.
        for n in 1..=12usize {
            for f in (0..n).filter(|f| 3 * f < n) {
                for count in 0..=n {
                    let outside = n - count;
                    assert_eq!(
                        is_quorum(count, n, f),
                        outside <= f,
                        "n={n} f={f} c={count}"
                    );
                    assert_eq!(is_blocking(count, f), count > f, "n={n} f={f} c={count}");
                }
            }
        }
    }

    #[test]
    fn params_reject_too_many_faults() {
        assert!(Params::new(3, 1).is_none());
        assert!(Params::new(4, 1).is_some());
        assert_eq!(Params::new(7, 2).unwrap().quorum(), 5);
    }

    #[test]
    fn first_vote_has_no_prev() {
        let h = VoteHistory::new().with_vote(Phase::One, View(2), A);
        assert_eq!(h.highest(Phase::One), Some(VoteRecord::new(View(2), A)));
        assert_eq!(h.prev(Phase::One), None);
    }

    #[test]
    fn differing_value_moves_old_highest_to_prev() {
        let h = VoteHistory::new()
            .with_vote(Phase::One, View(2), A)
            .with_vote(Phase::One, View(5), B);
        assert_eq!(h.highest(Phase::One), Some(VoteRecord::new(View(5), B)));
        assert_eq!(h.prev(Phase::One), Some(VoteRecord::new(View(2), A)));
    }

    #[test]
    fn same_value_keeps_prev() {
        let h = VoteHistory::new()
            .with_vote(Phase::One, View(2), A)
            .with_vote(Phase::One, View(5), A);
        assert_eq!(h.highest(Phase::One), Some(VoteRecord::new(View(5), A)));
        assert_eq!(h.prev(Phase::One), None);
    }

    #[test]
    fn phases_three_and_four_keep_no_prev() {
        let h = VoteHistory::new()
            .with_vote(Phase::Three, View(1), A)
            .with_vote(Phase::Three, View(2), B);
        assert_eq!(h.prev(Phase::Three), None);
        assert_eq!(h.highest(Phase::Three), Some(VoteRecord::new(View(2), B)));
    }

    #[test]
    #[should_panic(expected = "below highest view")]
    fn lower_view_is_a_protocol_bug() {
        VoteHistory::new()
            .with_vote(Phase::Two, View(3), A)
            .with_vote(Phase::Two, View(1), A);
    }

    #[test]
    fn encoded_size_is_fixed() {
        let empty = VoteHistory::new();
        let mut busy = VoteHistory::new();
        for v in 0..1000u64 {
            for p in Phase::ALL {
                busy.record(p, View(v), Value(v % 3));
            }
        }
        assert_eq!(empty.to_bytes().len(), busy.to_bytes().len());
        assert_ne!(empty.to_bytes(), busy.to_bytes());
    }

    /// Reference: keep every vote and extract the answers directly.
    fn from_log(log: &[(Phase, View, Value)]) -> VoteHistory {
        let mut h = VoteHistory::default();
        for phase in Phase::ALL {
            let votes: Vec<VoteRecord> = log
                .iter()
                .filter(|(p, _, _)| *p == phase)
                .map(|&(_, view, value)| VoteRecord { view, value })
                .collect();
            // Last-recorded wins among equal views (which only repeat the same value).
            let top = votes.iter().copied().rev().max_by_key(|r| r.view);
            h.highest[phase.index()] = top;
            if phase.index() < 2 {
                if let Some(top) = top {
                    h.prev[phase.index()] = votes
                        .iter()
                        .copied()
                        .filter(|r| r.value != top.value)
                        .rev()
                        .max_by_key(|r| r.view);
                }
            }
        }
        h
    }

    fn honest_log() -> impl Strategy<Value = Vec<(Phase, View, Value)>> {
        // Per phase a non-decreasing sequence of views, one value per view.
        prop::collection::vec((1u8..=4, 0u64..3, 0u64..3), 0..40).prop_map(|steps| {
            let mut views = [0u64; 4];
            let mut last: [Option<(u64, u64)>; 4] = [None; 4];
            let mut log = Vec::new();
            for (p, bump, val) in steps {
                let i = p as usize - 1;
                views[i] += bump;
                let value = match last[i] {
                    Some((v, val_prev)) if v == views[i] => val_prev,
                    _ => val,
                };
                last[i] = Some((views[i], value));
                log.push((Phase::from_number(p).unwrap(), View(views[i]), Value(value)));
            }
            log
        })
    }

    proptest! {
        #[test]
        fn record_matches_full_log(log in honest_log()) {
            let mut h = VoteHistory::new();
            for &(p, v, val) in &log {
                h.record(p, v, val);
            }
            prop_assert_eq!(h, from_log(&log));
            for p in [Phase::One, Phase::Two] {
                if let Some(prev) = h.prev(p) {
                    let top = h.highest(p).unwrap();
                    prop_assert!(prev.view < top.view);
                    prop_assert_ne!(prev.value, top.value);
                }
            }
        }
    }
}
