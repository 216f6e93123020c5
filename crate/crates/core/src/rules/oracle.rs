//! Literal, exponential-time versions of the safe-value rules.
//!
//! Every quorum, every blocking subset and every relevant value is enumerated
//! directly. Only usable for small `n` and `v`; the efficient rules are tested
//! against these.

use std::collections::BTreeSet;

use super::{ProofSet, SuggestSet};
use crate::types::{Params, Value, View, VoteRecord};

/// One received record, flattened: (vote, prev vote, lock).
type Row = (Option<VoteRecord>, Option<VoteRecord>, Option<VoteRecord>);

fn acceptable(row: &Row, v: View) -> bool {
    let (vote, prev, lock) = *row;
    let pair_ok = match (vote, prev) {
        (None, Some(_)) => false,
        (Some(a), Some(b)) => b.view < a.view && b.value != a.value,
        _ => true,
    };
    pair_ok && [vote, prev, lock].into_iter().flatten().all(|r| r.view < v)
}

fn claim(row: &Row, w: u64, x: Value) -> bool {
    let (vote, prev, _) = *row;
    w == 0
        || vote.is_some_and(|r| r.view.0 >= w && r.value == x)
        || prev.is_some_and(|r| r.view.0 >= w)
}

fn members(mask: u32, len: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |i| mask & (1 << i) != 0)
}

fn has_blocking_claim(rows: &[Row], q: u32, w: u64, x: Value, f: usize) -> bool {
    // Every subset of q with exactly f + 1 members.
    let mut b = q;
    loop {
        if b.count_ones() as usize == f + 1 && members(b, rows.len()).all(|i| claim(&rows[i], w, x))
        {
            return true;
        }
        if b == 0 {
            return false;
        }
        b = (b - 1) & q;
    }
}

fn quorums(len: usize, params: Params) -> impl Iterator<Item = u32> {
    (0u32..1 << len).filter(move |m| m.count_ones() as usize >= params.quorum())
}

fn lock_ok(rows: &[Row], q: u32, vp: u64, val: Value) -> bool {
    members(q, rows.len()).all(|i| match rows[i].2 {
        None => true,
        Some(l) => l.view.0 < vp || (l.view.0 == vp && l.value == val),
    })
}

fn unlocked(rows: &[Row], q: u32) -> bool {
    members(q, rows.len()).all(|i| rows[i].2.is_none())
}

fn value_domain(rows: &[Row], val: Value) -> Vec<Value> {
    let mut seen: BTreeSet<Value> = rows
        .iter()
        .flat_map(|&(a, b, c)| [a, b, c])
        .flatten()
        .map(|r| r.value)
        .collect();
    seen.insert(val);
    let top = seen.iter().next_back().map_or(0, |x| x.0);
    seen.insert(Value(top + 1));
    seen.insert(Value(top + 2));
    seen.into_iter().collect()
}

/// Leader rule by enumeration.
pub fn oracle_leader_rule(suggests: &SuggestSet, v: View, val: Value, params: Params) -> bool {
    if v.0 == 0 {
        return true;
    }
    let rows: Vec<Row> = suggests
        .values()
        .map(|s| (s.vote2, s.prev_vote2, s.vote3))
        .filter(|r| acceptable(r, v))
        .collect();
    quorums(rows.len(), params).any(|q| {
        unlocked(&rows, q)
            || (0..v.0).any(|vp| {
                lock_ok(&rows, q, vp, val) && has_blocking_claim(&rows, q, vp, val, params.f())
            })
    })
}

/// Node rule by enumeration.
pub fn oracle_node_rule(proofs: &ProofSet, v: View, val: Value, params: Params) -> bool {
    if v.0 == 0 {
        return true;
    }
    let rows: Vec<Row> = proofs
        .values()
        .map(|p| (p.vote1, p.prev_vote1, p.vote4))
        .filter(|r| acceptable(r, v))
        .collect();
    let domain = value_domain(&rows, val);
    let f = params.f();
    quorums(rows.len(), params).any(|q| {
        if unlocked(&rows, q) {
            return true;
        }
        // claimed[w][k]: some blocking subset of q claims domain[k] at view w.
        let claimed: Vec<Vec<bool>> = (0..v.0)
            .map(|w| {
                domain
                    .iter()
                    .map(|&x| has_blocking_claim(&rows, q, w, x, f))
                    .collect()
            })
            .collect();
        let val_idx = domain.iter().position(|&x| x == val).unwrap();
        (0..v.0).any(|vp| {
            if !lock_ok(&rows, q, vp, val) {
                return false;
            }
            if claimed[vp as usize][val_idx] {
                return true;
            }
            (vp..v.0).any(|lo| {
                (lo + 1..v.0).any(|hi| {
                    (0..domain.len()).any(|xi| {
                        claimed[lo as usize][xi]
                            && (0..domain.len()).any(|yi| yi != xi && claimed[hi as usize][yi])
                    })
                })
            })
        })
    })
}
