//! Safe-value rules.
//!
//! A leader entering view `v > 0` picks a value from the `suggest` messages
//! of a quorum; every node checks the leader's proposal against the `proof`
//! messages of a quorum. Both checks search backwards over views `v' < v`.
//!
//! The rules quantify over quorums, but every per-member condition in them is
//! a filter on that member's own record, and the blocking sets must sit inside
//! the quorum. For a candidate `(v', val)` the best quorum is therefore the set
//! of *all* records consistent with it, so the algorithms count instead of
//! enumerating subsets. [`oracle`] enumerates subsets literally and is used to
//! cross-check these functions.

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use crate::error::RuleError;
use crate::message::{Proof, Suggest};
use crate::types::{NodeId, Params, Value, View, VoteRecord};

/// Suggest messages received by a leader for one view, first one per sender.
pub type SuggestSet = BTreeMap<NodeId, Suggest>;
/// Proof messages received by a node for one view, first one per sender.
pub type ProofSet = BTreeMap<NodeId, Proof>;

/// Common shape of suggest and proof messages.
pub trait SafetyRecord {
    /// The vote whose claims matter (vote-2 for suggest, vote-1 for proof).
    fn vote(&self) -> Option<VoteRecord>;
    /// Highest earlier vote of the same phase with a different value.
    fn prev_vote(&self) -> Option<VoteRecord>;
    /// The vote that pins a value (vote-3 for suggest, vote-4 for proof).
    fn lock(&self) -> Option<VoteRecord>;
}

impl SafetyRecord for Suggest {
    fn vote(&self) -> Option<VoteRecord> {
        self.vote2
    }
    fn prev_vote(&self) -> Option<VoteRecord> {
        self.prev_vote2
    }
    fn lock(&self) -> Option<VoteRecord> {
        self.vote3
    }
}

impl SafetyRecord for Proof {
    fn vote(&self) -> Option<VoteRecord> {
        self.vote1
    }
    fn prev_vote(&self) -> Option<VoteRecord> {
        self.prev_vote1
    }
    fn lock(&self) -> Option<VoteRecord> {
        self.vote4
    }
}

/// Checks the `(vote, prev_vote)` pair invariant of a history summary.
pub fn check_pair<R: SafetyRecord>(record: &R) -> Result<(), RuleError> {
    match (record.vote(), record.prev_vote()) {
        (None, Some(_)) => Err(RuleError::PrevWithoutVote),
        (Some(vote), Some(prev)) if prev.view >= vote.view => Err(RuleError::PrevNotLower),
        (Some(vote), Some(prev)) if prev.value == vote.value => Err(RuleError::PrevSameValue),
        _ => Ok(()),
    }
}

/// Full well-formedness for a record received in `view`: the pair invariant
/// holds and every reported vote comes from an earlier view.
pub fn check_record<R: SafetyRecord>(record: &R, view: View) -> Result<(), RuleError> {
    check_pair(record)?;
    let reported = [record.vote(), record.prev_vote(), record.lock()];
    if reported.iter().flatten().any(|r| r.view >= view) {
        return Err(RuleError::FromFuture);
    }
    Ok(())
}

/// Whether `record` claims that `val` is safe at `v_prime`.
pub fn node_claim_safe<R: SafetyRecord>(
    record: &R,
    v_prime: View,
    val: Value,
) -> Result<bool, RuleError> {
    check_pair(record)?;
    Ok(claims(record, v_prime, val))
}

fn claims<R: SafetyRecord>(record: &R, v_prime: View, val: Value) -> bool {
    if v_prime.is_zero() {
        return true;
    }
    if matches!(record.vote(), Some(vote) if vote.view >= v_prime && vote.value == val) {
        return true;
    }
    matches!(record.prev_vote(), Some(prev) if prev.view >= v_prime)
}

/// Claim by any value that appears in no record's `vote` field.
fn claims_unlisted<R: SafetyRecord>(record: &R, v_prime: View) -> bool {
    v_prime.is_zero() || matches!(record.prev_vote(), Some(prev) if prev.view >= v_prime)
}

/// Member of the maximal quorum for `(v_prime, val)`: no lock above
/// `v_prime`, and a lock at `v_prime` only for `val`.
fn consistent<R: SafetyRecord>(record: &R, v_prime: View, val: Value) -> bool {
    match record.lock() {
        None => true,
        Some(lock) => lock.view < v_prime || (lock.view == v_prime && lock.value == val),
    }
}

/// Which parts of the node-side rule are active. The reduced variants exist so
/// the explorer can show that each clause is load-bearing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RuleVariant {
    #[default]
    Full,
    /// Drops the two-blocking-set alternative.
    WithoutTwoBlockingSets,
    /// Drops the blocking-set requirement altogether.
    WithoutBlockingClaims,
}

/// Counts claim evaluations so tests can bound the work done.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RuleStats {
    pub claim_evaluations: u64,
}

struct Counter<'a>(&'a mut RuleStats);

impl Counter<'_> {
    fn count<R: SafetyRecord>(&mut self, q: &[&R], mut pred: impl FnMut(&R) -> bool) -> usize {
        self.0.claim_evaluations += q.len() as u64;
        q.iter().filter(|r| pred(r)).count()
    }
}

fn well_formed<R: SafetyRecord>(records: &BTreeMap<NodeId, R>, view: View) -> Vec<&R> {
    records
        .values()
        .filter(|r| check_record(*r, view).is_ok())
        .collect()
}

fn quorum_for<'a, R: SafetyRecord>(records: &[&'a R], v_prime: View, val: Value) -> Vec<&'a R> {
    records
        .iter()
        .copied()
        .filter(|r| consistent(*r, v_prime, val))
        .collect()
}

fn no_lock_quorum<R: SafetyRecord>(records: &[&R], params: Params) -> bool {
    params.is_quorum(records.iter().filter(|r| r.lock().is_none()).count())
}

/// Views `v' > 0` where fewer than `f + 1` records could claim anything safe
/// cannot satisfy the blocking-set clause and are skipped.
fn may_have_blocking_claims<R: SafetyRecord>(
    records: &[&R],
    v_prime: View,
    params: Params,
) -> bool {
    if v_prime.is_zero() {
        return true;
    }
    let reach = |rec: Option<VoteRecord>| matches!(rec, Some(r) if r.view >= v_prime);
    params.is_blocking(
        records
            .iter()
            .filter(|r| reach(r.vote()) || reach(r.prev_vote()))
            .count(),
    )
}

fn leader_qualifies_at(
    records: &[&Suggest],
    v_prime: View,
    val: Value,
    params: Params,
    stats: &mut Counter,
) -> bool {
    let q = quorum_for(records, v_prime, val);
    params.is_quorum(q.len()) && params.is_blocking(stats.count(&q, |r| claims(r, v_prime, val)))
}

/// Whether the leader may propose `val` in view `v` given `suggests`.
pub fn leader_value_is_safe(suggests: &SuggestSet, v: View, val: Value, params: Params) -> bool {
    leader_value_is_safe_counted(suggests, v, val, params, &mut RuleStats::default())
}

pub fn leader_value_is_safe_counted(
    suggests: &SuggestSet,
    v: View,
    val: Value,
    params: Params,
    stats: &mut RuleStats,
) -> bool {
    if v.is_zero() {
        return true;
    }
    let records = well_formed(suggests, v);
    if !params.is_quorum(records.len()) {
        return false;
    }
    if no_lock_quorum(&records, params) {
        return true;
    }
    let mut counter = Counter(stats);
    (0..v.0)
        .rev()
        .map(View)
        .filter(|&vp| may_have_blocking_claims(&records, vp, params))
        .any(|vp| leader_qualifies_at(&records, vp, val, params, &mut counter))
}

/// Value a leader proposes in view `v`, or `None` while no quorum of suggests
/// justifies any value.
///
/// `init` wins whenever it is safe (in particular when arbitrary values are);
/// otherwise the safe value justified at the highest view is chosen, with the
/// smallest value breaking ties.
pub fn leader_pick_safe_value(
    suggests: &SuggestSet,
    v: View,
    init: Value,
    params: Params,
) -> Option<Value> {
    leader_pick_safe_value_counted(suggests, v, init, params, &mut RuleStats::default())
}

pub fn leader_pick_safe_value_counted(
    suggests: &SuggestSet,
    v: View,
    init: Value,
    params: Params,
    stats: &mut RuleStats,
) -> Option<Value> {
    if leader_value_is_safe_counted(suggests, v, init, params, stats) {
        return Some(init);
    }
    let records = well_formed(suggests, v);
    if !params.is_quorum(records.len()) {
        return None;
    }
    // A value named in no record is only ever as safe as `init`, which has
    // already been ruled out.
    let candidates: BTreeSet<Value> = records
        .iter()
        .flat_map(|r| [r.vote2, r.prev_vote2, r.vote3])
        .flatten()
        .map(|r| r.value)
        .collect();
    let mut counter = Counter(stats);
    for vp in (0..v.0).rev().map(View) {
        if !may_have_blocking_claims(&records, vp, params) {
            continue;
        }
        if let Some(&val) = candidates
            .iter()
            .find(|&&val| leader_qualifies_at(&records, vp, val, params, &mut counter))
        {
            return Some(val);
        }
    }
    None
}

/// Whether a node accepts the leader's `val` in view `v` given `proofs`.
pub fn node_check_safe(proofs: &ProofSet, v: View, val: Value, params: Params) -> bool {
    node_check_safe_with(
        proofs,
        v,
        val,
        params,
        RuleVariant::Full,
        &mut RuleStats::default(),
    )
}

pub fn node_check_safe_with(
    proofs: &ProofSet,
    v: View,
    val: Value,
    params: Params,
    variant: RuleVariant,
    stats: &mut RuleStats,
) -> bool {
    if v.is_zero() {
        return true;
    }
    let records = well_formed(proofs, v);
    if !params.is_quorum(records.len()) {
        return false;
    }
    if no_lock_quorum(&records, params) {
        return true;
    }
    let mut counter = Counter(stats);
    for vp in (0..v.0).rev().map(View) {
        let q = quorum_for(&records, vp, val);
        if !params.is_quorum(q.len()) {
            continue;
        }
        if variant == RuleVariant::WithoutBlockingClaims {
            return true;
        }
        if params.is_blocking(counter.count(&q, |r| claims(r, vp, val))) {
            return true;
        }
        // Two blocking sets: `vp` is the best choice for the lower view (the
        // consistent set only grows with it) and `vp + 1` the best choice for
        // the upper view (claims only shrink as the view grows).
        if variant == RuleVariant::Full
            && vp.0 + 1 < v.0
            && two_blocking_sets(&q, vp, params, &mut counter)
        {
            return true;
        }
    }
    false
}

/// Some blocking set in `q` claims a value `y` safe at `lower + 1` and another
/// blocking set claims some `x != y` safe at `lower`.
fn two_blocking_sets(q: &[&Proof], lower: View, params: Params, counter: &mut Counter) -> bool {
    let upper = lower.next();
    let listed: BTreeSet<Value> = q.iter().filter_map(|r| r.vote1).map(|r| r.value).collect();
    // Values outside `listed` form an unbounded class that claims identically.
    let unlisted_upper = params.is_blocking(counter.count(q, |r| claims_unlisted(r, upper)));
    let upper_any = unlisted_upper
        || listed
            .iter()
            .any(|&x| params.is_blocking(counter.count(q, |r| claims(r, upper, x))));
    if !upper_any {
        return false;
    }
    if params.is_blocking(counter.count(q, |r| claims_unlisted(r, lower))) {
        return true;
    }
    listed
        .iter()
        .filter(|&&x| params.is_blocking(counter.count(q, |r| claims(r, lower, x))))
        .nth(1)
        .is_some()
}
