use std::collections::{BTreeMap, HashMap, HashSet};

use crate::message::{Message, SlotMessage};
use crate::multishot::SLOT_WINDOW;
use crate::sim::{Event, Mode, Trace, TraceEvent};
use crate::types::{NodeId, Phase, Slot, Ticks, Value, View};

use super::{Outcome, STORAGE_FACTOR};

fn fail(detail: String, witness: Vec<usize>) -> Outcome {
    Outcome::Fail { detail, witness }
}

fn honest(trace: &Trace, node: NodeId) -> bool {
    trace.meta.is_honest(node)
}

fn quorum(trace: &Trace) -> usize {
    trace.meta.n - trace.meta.f
}

fn single_only(trace: &Trace) -> Option<Outcome> {
    (trace.meta.mode != Mode::Single).then(|| Outcome::Vacuous("single-shot property".into()))
}

fn multi_only(trace: &Trace) -> Option<Outcome> {
    (trace.meta.mode != Mode::Multi).then(|| Outcome::Vacuous("multi-shot property".into()))
}

/// Honest SEND events, one per message (broadcast copies collapsed).
fn honest_sends<'a>(trace: &'a Trace) -> impl Iterator<Item = (usize, NodeId, &'a str)> + 'a {
    let mut last: Option<(NodeId, &str)> = None;
    trace
        .events
        .iter()
        .enumerate()
        .filter_map(move |(i, e)| match &e.event {
            Event::Send { node, msg, .. } if honest(trace, *node) => {
                let key = (*node, msg.as_str());
                if last == Some(key) {
                    return None;
                }
                last = Some(key);
                Some((i, *node, msg.as_str()))
            }
            _ => None,
        })
}

/// First value seen per key; reports the first conflict.
struct FirstSeen<K> {
    seen: HashMap<K, (usize, Value)>,
}

impl<K: std::hash::Hash + Eq> FirstSeen<K> {
    fn new() -> Self {
        FirstSeen {
            seen: HashMap::new(),
        }
    }

    fn offer(&mut self, key: K, idx: usize, value: Value) -> Option<(usize, Value)> {
        match self.seen.get(&key) {
            Some(&(first, v)) if v != value => Some((first, v)),
            Some(_) => None,
            None => {
                self.seen.insert(key, (idx, value));
                None
            }
        }
    }
}

pub(super) fn agreement(trace: &Trace) -> Outcome {
    let mut seen = FirstSeen::new();
    let mut any = false;
    for (i, e) in trace.events.iter().enumerate() {
        let (node, slot, value) = match e.event {
            Event::Decide { node, value, .. } => (node, None, value),
            Event::Finalize {
                node, slot, value, ..
            } => (node, Some(slot), value),
            _ => continue,
        };
        if !honest(trace, node) {
            continue;
        }
        any = true;
        if let Some((first, other)) = seen.offer(slot, i, value) {
            let what = slot.map_or("decided".to_string(), |s| {
                format!("finalized slot {s} with")
            });
            return fail(
                format!("honest nodes {what} {other} and {value}"),
                vec![first, i],
            );
        }
    }
    if any {
        Outcome::Pass
    } else {
        Outcome::Vacuous("no honest decisions".into())
    }
}

pub(super) fn validity(trace: &Trace) -> Outcome {
    if let Some(o) = single_only(trace) {
        return o;
    }
    let meta = &trace.meta;
    if !meta.byzantine.is_empty() {
        return Outcome::Vacuous("byzantine nodes present".into());
    }
    let Some(&input) = meta.inputs.first() else {
        return Outcome::Vacuous("no inputs".into());
    };
    if meta.inputs.iter().any(|&v| v != input) {
        return Outcome::Vacuous("inputs differ".into());
    }
    for (i, e) in trace.events.iter().enumerate() {
        if let Event::Decide { value, .. } = e.event {
            if value != input {
                return fail(
                    format!("decided {value} although every input is {input}"),
                    vec![i],
                );
            }
        }
    }
    Outcome::Pass
}

/// Latest time by which a run must have finished under the liveness argument:
/// after GST, at most f + 1 views with faulty or stale leaders, each bounded
/// by the 9Δ timer plus Δ for the view change to spread.
pub fn termination_deadline(trace: &Trace) -> Ticks {
    let meta = &trace.meta;
    let view_budget = 10 * meta.delta_bound;
    let single = meta.gst + (meta.f as u64 + 2) * view_budget + 9 * meta.delta_bound;
    match meta.last_slot {
        None => single,
        // Every slot may need its own view change.
        Some(last) => meta.gst + (last.0 + 4) * (meta.f as u64 + 2) * view_budget,
    }
}

pub(super) fn termination(trace: &Trace) -> Outcome {
    let meta = &trace.meta;
    let mut done: HashSet<NodeId> = HashSet::new();
    for e in &trace.events {
        match e.event {
            Event::Decide { node, .. } => {
                done.insert(node);
            }
            Event::Finalize { node, slot, .. } if meta.last_slot.is_some_and(|l| slot >= l) => {
                done.insert(node);
            }
            _ => {}
        }
    }
    let missing: Vec<NodeId> = meta.honest().filter(|id| !done.contains(id)).collect();
    if missing.is_empty() {
        return Outcome::Pass;
    }
    // Nodes never retransmit. A lost view change can stall them for good,
    // and in multi-shot so can a lost block, which nobody sends again. The
    // liveness argument only covers runs without such losses.
    let critical = |msg: &str| {
        msg.starts_with("VC(") || (meta.mode == Mode::Multi && msg.starts_with("PROPOSAL("))
    };
    let critical_ids: HashSet<u64> = trace
        .events
        .iter()
        .filter_map(|e| match &e.event {
            Event::Send { id, msg, .. } if critical(msg) => Some(*id),
            _ => None,
        })
        .collect();
    let lost = trace
        .events
        .iter()
        .any(|e| matches!(e.event, Event::Drop { id, .. } if critical_ids.contains(&id)));
    if lost {
        let what = if meta.mode == Mode::Multi {
            "a view change or block"
        } else {
            "a view-change message"
        };
        return Outcome::Vacuous(format!("{what} was lost before GST"));
    }
    let deadline = termination_deadline(trace);
    if meta.horizon < deadline {
        return Outcome::Vacuous(format!(
            "horizon {} ends before deadline {deadline}",
            meta.horizon
        ));
    }
    let names: Vec<String> = missing.iter().map(|n| n.to_string()).collect();
    fail(
        format!("honest nodes {} never finished", names.join(",")),
        Vec::new(),
    )
}

fn single_vote(msg: &str) -> Option<(Option<Phase>, View, Value)> {
    match msg.parse::<Message>().ok()? {
        Message::Vote { phase, view, value } => Some((Some(phase), view, value)),
        Message::Proposal { view, value } => Some((None, view, value)),
        _ => None,
    }
}

pub(super) fn cross_view(trace: &Trace) -> Outcome {
    match trace.meta.mode {
        Mode::Single => {
            let decisions: Vec<(usize, View, Value)> = trace
                .events
                .iter()
                .enumerate()
                .filter_map(|(i, e)| match e.event {
                    Event::Decide { node, view, value } if honest(trace, node) => {
                        Some((i, view, value))
                    }
                    _ => None,
                })
                .collect();
            if decisions.is_empty() {
                return Outcome::Vacuous("no honest decisions".into());
            }
            for (i, _, msg) in honest_sends(trace) {
                let Some((_, view, value)) = single_vote(msg) else {
                    continue;
                };
                if let Some(&(d, dv, dx)) = decisions
                    .iter()
                    .find(|&&(_, dv, dx)| view > dv && value != dx)
                {
                    return fail(
                        format!("{dx} decided in view {dv}, yet an honest node sent {msg}"),
                        vec![d, i],
                    );
                }
            }
            Outcome::Pass
        }
        Mode::Multi => {
            let mut finals: HashMap<Slot, Vec<(usize, View, Value)>> = HashMap::new();
            for (i, e) in trace.events.iter().enumerate() {
                if let Event::Finalize {
                    node,
                    slot,
                    view,
                    value,
                } = e.event
                {
                    if honest(trace, node) {
                        finals.entry(slot).or_default().push((i, view, value));
                    }
                }
            }
            if finals.is_empty() {
                return Outcome::Vacuous("nothing finalized".into());
            }
            for (i, e) in trace.events.iter().enumerate() {
                let Event::Record {
                    node,
                    slot,
                    view,
                    value,
                    phase,
                } = e.event
                else {
                    continue;
                };
                if !honest(trace, node) {
                    continue;
                }
                let Some(fs) = finals.get(&slot) else {
                    continue;
                };
                if let Some(&(d, fv, fx)) = fs.iter().find(|&&(_, fv, fx)| view > fv && value != fx)
                {
                    return fail(
                        format!("slot {slot} finalized {fx} in view {fv}, yet node {node} cast vote-{phase} for {value} in view {view}"),
                        vec![d, i],
                    );
                }
            }
            Outcome::Pass
        }
    }
}

pub(super) fn within_view(trace: &Trace) -> Outcome {
    let mut seen = FirstSeen::new();
    match trace.meta.mode {
        Mode::Single => {
            for (i, _, msg) in honest_sends(trace) {
                let Some((Some(phase), view, value)) = single_vote(msg) else {
                    continue;
                };
                if phase == Phase::One {
                    continue;
                }
                if let Some((first, other)) = seen.offer((None, view), i, value) {
                    return fail(
                        format!("view {view} has honest later-phase votes for {other} and {value}"),
                        vec![first, i],
                    );
                }
            }
        }
        Mode::Multi => {
            for (i, e) in trace.events.iter().enumerate() {
                let Event::Record {
                    node,
                    slot,
                    phase,
                    view,
                    value,
                } = e.event
                else {
                    continue;
                };
                if phase == Phase::One || !honest(trace, node) {
                    continue;
                }
                if let Some((first, other)) = seen.offer((Some(slot), view), i, value) {
                    return fail(
                        format!("slot {slot} view {view} has honest later-phase votes for {other} and {value}"),
                        vec![first, i],
                    );
                }
            }
        }
    }
    Outcome::Pass
}

pub(super) fn one_vote(trace: &Trace) -> Outcome {
    // Key: node, slot, view, phase (0 for proposals).
    let mut seen: FirstSeen<(NodeId, u64, View, u8)> = FirstSeen::new();
    for (i, node, msg) in honest_sends(trace) {
        let key_value = match trace.meta.mode {
            Mode::Single => single_vote(msg)
                .map(|(phase, view, value)| ((0, view, phase.map_or(0, Phase::number)), value)),
            Mode::Multi => match msg.parse::<SlotMessage>().ok() {
                Some(SlotMessage::Vote { slot, view, value }) => Some(((slot.0, view, 1), value)),
                Some(SlotMessage::Proposal { view, block, .. }) => {
                    Some(((block.slot.0, view, 0), block.id()))
                }
                _ => None,
            },
        };
        let Some(((slot, view, phase), value)) = key_value else {
            continue;
        };
        if let Some((first, other)) = seen.offer((node, slot, view, phase), i, value) {
            return fail(
                format!("node {node} sent two values ({other}, {value}) for the same vote"),
                vec![first, i],
            );
        }
    }
    Outcome::Pass
}

/// Per node: (what, sender) -> index of the first delivery.
type Deliveries<K> = HashMap<NodeId, HashMap<K, Vec<(usize, NodeId)>>>;

fn supporters<K: std::hash::Hash + Eq>(
    d: &Deliveries<K>,
    node: NodeId,
    key: &K,
    before: usize,
) -> usize {
    d.get(&node)
        .and_then(|m| m.get(key))
        .map(|v| {
            v.iter()
                .filter(|&&(i, _)| i < before)
                .map(|&(_, s)| s)
                .collect::<HashSet<_>>()
                .len()
        })
        .unwrap_or(0)
}

pub(super) fn quorum_causality(trace: &Trace) -> Outcome {
    let q = quorum(trace);
    match trace.meta.mode {
        Mode::Single => {
            let mut d: Deliveries<(View, Value)> = HashMap::new();
            for (i, e) in trace.events.iter().enumerate() {
                if let Event::Deliver {
                    node, from, msg, ..
                } = &e.event
                {
                    if let Ok(Message::Vote {
                        phase: Phase::Four,
                        view,
                        value,
                    }) = msg.parse::<Message>()
                    {
                        d.entry(*node)
                            .or_default()
                            .entry((view, value))
                            .or_default()
                            .push((i, *from));
                    }
                }
            }
            for (i, e) in trace.events.iter().enumerate() {
                if let Event::Decide { node, view, value } = e.event {
                    if honest(trace, node) && supporters(&d, node, &(view, value), i) < q {
                        return fail(
                            format!("node {node} decided {value} without a vote-4 quorum"),
                            vec![i],
                        );
                    }
                }
            }
        }
        Mode::Multi => {
            let mut d: Deliveries<(Slot, View, Value)> = HashMap::new();
            for (i, e) in trace.events.iter().enumerate() {
                let Event::Deliver {
                    node, from, msg, ..
                } = &e.event
                else {
                    continue;
                };
                let key = match msg.parse::<SlotMessage>() {
                    Ok(SlotMessage::Vote { slot, view, value }) => (slot, view, value),
                    Ok(SlotMessage::Proposal {
                        block, parent_view, ..
                    }) if block.slot.0 > 1 => (Slot(block.slot.0 - 1), parent_view, block.parent),
                    _ => continue,
                };
                d.entry(*node)
                    .or_default()
                    .entry(key)
                    .or_default()
                    .push((i, *from));
            }
            let mut notarized: HashMap<NodeId, HashSet<Slot>> = HashMap::new();
            for (i, e) in trace.events.iter().enumerate() {
                match e.event {
                    Event::Notarize {
                        node,
                        slot,
                        view,
                        value,
                    } if honest(trace, node) => {
                        if supporters(&d, node, &(slot, view, value), i) < q {
                            return fail(
                                format!("node {node} notarized slot {slot} without a vote quorum"),
                                vec![i],
                            );
                        }
                        notarized.entry(node).or_default().insert(slot);
                    }
                    Event::Finalize { node, slot, .. } if honest(trace, node) => {
                        let have = notarized.get(&node);
                        let run = have.is_some_and(|h| {
                            h.iter()
                                .any(|&j| j >= slot && (1..4).all(|k| h.contains(&Slot(j.0 + k))))
                        });
                        if !run {
                            return fail(
                                format!("node {node} finalized slot {slot} without four consecutive notarizations"),
                                vec![i],
                            );
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    Outcome::Pass
}

pub(super) fn post_gst_delivery(trace: &Trace) -> Outcome {
    let meta = &trace.meta;
    let delivered: HashMap<u64, Ticks> = trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            Event::Deliver { id, .. } => Some((id, e.t)),
            _ => None,
        })
        .collect();
    for (i, e) in trace.events.iter().enumerate() {
        let Event::Send { to, id, .. } = e.event else {
            continue;
        };
        let deadline = e.t + meta.delta_bound;
        if e.t < meta.gst || !honest(trace, to) || deadline > meta.horizon {
            continue;
        }
        match delivered.get(&id) {
            Some(&t) if t <= deadline => {}
            Some(&t) => {
                return fail(
                    format!("message {id} sent at {} delivered late at {t}", e.t),
                    vec![i],
                )
            }
            None => {
                return fail(
                    format!("message {id} sent at {} never delivered", e.t),
                    vec![i],
                )
            }
        }
    }
    Outcome::Pass
}

pub(super) fn authentication(trace: &Trace) -> Outcome {
    let sends: HashMap<u64, (usize, NodeId, NodeId, &str)> = trace
        .events
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match &e.event {
            Event::Send { node, to, id, msg } => Some((*id, (i, *node, *to, msg.as_str()))),
            _ => None,
        })
        .collect();
    for (i, e) in trace.events.iter().enumerate() {
        let Event::Deliver {
            node,
            from,
            id,
            msg,
        } = &e.event
        else {
            continue;
        };
        match sends.get(id) {
            None => {
                return fail(
                    format!("delivery of message {id} that was never sent"),
                    vec![i],
                )
            }
            Some(&(s, _, _, _)) if s > i => {
                return fail(
                    format!("message {id} delivered before it was sent"),
                    vec![s, i],
                )
            }
            Some(&(s, sender, to, body)) => {
                if sender != *from || to != *node || body != msg {
                    return fail(
                        format!("message {id} delivered as from {from} but sent by {sender}"),
                        vec![s, i],
                    );
                }
            }
        }
    }
    Outcome::Pass
}

pub(super) fn storage(trace: &Trace) -> Outcome {
    let limit = STORAGE_FACTOR * trace.meta.n;
    let mut first: HashMap<NodeId, (usize, usize)> = HashMap::new();
    let mut any = false;
    for (i, e) in trace.events.iter().enumerate() {
        let Event::Sample {
            node,
            persistent,
            volatile,
            ..
        } = e.event
        else {
            continue;
        };
        if !honest(trace, node) {
            continue;
        }
        any = true;
        if volatile > limit {
            return fail(
                format!("node {node} holds {volatile} volatile entries, above {limit}"),
                vec![i],
            );
        }
        match first.get(&node) {
            Some(&(j, p)) if p != persistent => {
                return fail(
                    format!("node {node} persistent state changed from {p} to {persistent} bytes"),
                    vec![j, i],
                );
            }
            Some(_) => {}
            None => {
                first.insert(node, (i, persistent));
            }
        }
    }
    if any {
        Outcome::Pass
    } else {
        Outcome::Vacuous("no storage samples".into())
    }
}

pub(super) fn consistency(trace: &Trace) -> Outcome {
    if let Some(o) = multi_only(trace) {
        return o;
    }
    let mut height: HashMap<NodeId, (Option<usize>, u64)> = HashMap::new();
    let mut chain = FirstSeen::new();
    for (i, e) in trace.events.iter().enumerate() {
        let Event::Finalize {
            node, slot, value, ..
        } = e.event
        else {
            continue;
        };
        if !honest(trace, node) {
            continue;
        }
        let (prev, h) = height.get(&node).copied().unwrap_or((None, 0));
        if slot.0 != h + 1 {
            let mut witness: Vec<usize> = prev.into_iter().collect();
            witness.push(i);
            return fail(
                format!("node {node} finalized slot {slot} right after slot {h}"),
                witness,
            );
        }
        height.insert(node, (Some(i), slot.0));
        if let Some((first, other)) = chain.offer(slot, i, value) {
            return fail(
                format!("finalized chains diverge at slot {slot}: {other} vs {value}"),
                vec![first, i],
            );
        }
    }
    if height.is_empty() {
        Outcome::Vacuous("nothing finalized".into())
    } else {
        Outcome::Pass
    }
}

/// Project the votes one slot received (as phase-mapped records) onto a
/// single-shot trace and re-run the single-shot invariants on it.
pub(super) fn slot_reduction(trace: &Trace) -> Outcome {
    if let Some(o) = multi_only(trace) {
        return o;
    }
    let mut per_slot: BTreeMap<Slot, Vec<(usize, TraceEvent)>> = BTreeMap::new();
    let mut last_view: HashMap<(NodeId, Slot, Phase), (usize, View)> = HashMap::new();
    for (i, e) in trace.events.iter().enumerate() {
        let projected = match e.event {
            Event::Record {
                node,
                slot,
                phase,
                view,
                value,
            } if honest(trace, node) => {
                if let Some(&(j, v)) = last_view.get(&(node, slot, phase)) {
                    if view < v {
                        return fail(format!("node {node} recorded slot {slot} vote-{phase} in view {view} after view {v}"), vec![j, i]);
                    }
                }
                last_view.insert((node, slot, phase), (i, view));
                let msg = Message::Vote { phase, view, value }.to_string();
                (
                    slot,
                    Event::Send {
                        node,
                        to: node,
                        id: i as u64,
                        msg,
                    },
                )
            }
            Event::Finalize {
                node,
                slot,
                view,
                value,
            } => (slot, Event::Decide { node, value, view }),
            _ => continue,
        };
        per_slot.entry(projected.0).or_default().push((
            i,
            TraceEvent {
                t: e.t,
                event: projected.1,
            },
        ));
    }
    for (slot, events) in per_slot {
        let mut meta = trace.meta.clone();
        meta.mode = Mode::Single;
        meta.last_slot = None;
        let (origin, events): (Vec<usize>, Vec<TraceEvent>) = events.into_iter().unzip();
        let single = Trace { meta, events };
        for check in [agreement, one_vote, within_view, cross_view] {
            if let Outcome::Fail { detail, witness } = check(&single) {
                return fail(
                    format!("slot {slot}: {detail}"),
                    witness.into_iter().map(|w| origin[w]).collect(),
                );
            }
        }
    }
    Outcome::Pass
}

pub(super) fn window(trace: &Trace) -> Outcome {
    if let Some(o) = multi_only(trace) {
        return o;
    }
    let mut finalized: HashMap<NodeId, u64> = HashMap::new();
    for (i, e) in trace.events.iter().enumerate() {
        match &e.event {
            Event::Sample { node, slots, .. }
                if honest(trace, *node) && *slots as u64 > SLOT_WINDOW =>
            {
                return fail(format!("node {node} retains {slots} slots"), vec![i]);
            }
            Event::Finalize { node, slot, .. } => {
                finalized.insert(*node, slot.0);
            }
            Event::Send { node, msg, .. } if honest(trace, *node) => {
                let Ok(m) = msg.parse::<SlotMessage>() else {
                    continue;
                };
                let top = finalized.get(node).copied().unwrap_or(0) + SLOT_WINDOW;
                if m.slot().0 > top {
                    return fail(
                        format!("node {node} sent {msg} beyond its window (last slot {top})"),
                        vec![i],
                    );
                }
            }
            _ => {}
        }
    }
    Outcome::Pass
}
