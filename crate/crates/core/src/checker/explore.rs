//! Bounded exhaustive exploration of single-shot TetraBFT.
//!
//! The model abstracts the network away. Honest behaviour in view `w` only
//! depends on the histories honest nodes report when entering `w` (votes
//! below `w`, frozen by then) and on the votes cast in `w` itself. Any run
//! can therefore be reordered view by view without changing which votes are
//! cast, and the explorer proceeds in layers:
//!
//! - a boundary state is the vote history of every honest node plus the
//!   values decided so far, with honest nodes sorted (they are
//!   interchangeable once proposals are tied to views);
//! - from each boundary state every reachable set of votes in the next view
//!   is enumerated. A node may stop voting at any point, and a node that
//!   skips the view is covered by one that enters and stays silent.
//!
//! Guards are existential over delivery orders: a vote-1 is enabled when some
//! quorum of the available proofs (any subset of the honest ones plus
//! Byzantine ones) accepts the value.
//!
//! Byzantine menu:
//! - `equivocate`: Byzantine votes count for every value at once. Without it
//!   they commit to one value per phase and view, chosen when first needed.
//! - `lying_history`: Byzantine nodes report any well-formed Suggest/Proof.
//!   Without it they report nothing.
//!
//! Checked along the way:
//! - agreement: no two values can be decided;
//! - within-view: honest vote-2..4 in one view are for a single value;
//! - liveness lemma: at every boundary, an honest leader of the next view
//!   finds a value from the honest suggests and every honest node accepts it
//!   from the honest proofs.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use crate::message::{Proof, Suggest};
use crate::node::leader;
use crate::rules::{self, ProofSet, RuleStats, RuleVariant, SuggestSet};
use crate::types::{NodeId, Params, Phase, Value, View, VoteHistory, VoteRecord};

const MAX_HONEST: usize = 5;
const MAX_VIEWS: u64 = 6;
const MAX_VALUES: u8 = 8;
const PHASES: [Phase; 4] = [Phase::One, Phase::Two, Phase::Three, Phase::Four];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreConfig {
    pub n: usize,
    pub f: usize,
    /// Number of views explored, starting at view 0.
    pub views: u64,
    /// Size of the value domain.
    pub values: u8,
    pub variant: RuleVariant,
    pub equivocate: bool,
    pub lying_history: bool,
}

impl ExploreConfig {
    pub fn new(n: usize, f: usize, views: u64) -> Self {
        ExploreConfig {
            n,
            f,
            views,
            values: 2,
            variant: RuleVariant::Full,
            equivocate: true,
            lying_history: true,
        }
    }

    fn validate(&self) -> Result<Params, String> {
        let params = Params::new(self.n, self.f)
            .ok_or_else(|| format!("n = {} needs n > 3f (f = {})", self.n, self.f))?;
        if self.n - self.f > MAX_HONEST {
            return Err(format!("at most {MAX_HONEST} honest nodes"));
        }
        if !(1..=MAX_VIEWS).contains(&self.views) {
            return Err(format!("explore 1 to {MAX_VIEWS} views"));
        }
        if !(1..=MAX_VALUES).contains(&self.values) {
            return Err(format!("value domain must have 1 to {MAX_VALUES} values"));
        }
        Ok(params)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Enter {
        node: NodeId,
        view: View,
    },
    Propose {
        node: NodeId,
        view: View,
        value: Value,
    },
    Vote {
        node: NodeId,
        phase: Phase,
        view: View,
        value: Value,
    },
    /// The Byzantine nodes commit to a vote (only without equivocation).
    ByzantineVote {
        phase: Phase,
        view: View,
        value: Value,
    },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Action::Enter { node, view } => write!(f, "{node} enters view {view}"),
            Action::Propose { node, view, value } => {
                write!(f, "{node} proposes {value} in view {view}")
            }
            Action::Vote {
                node,
                phase,
                view,
                value,
            } => write!(f, "{node} sends vote-{phase} for {value} in view {view}"),
            Action::ByzantineVote { phase, view, value } => {
                write!(
                    f,
                    "byzantine nodes send vote-{phase} for {value} in view {view}"
                )
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub property: &'static str,
    pub detail: String,
    pub byzantine: Vec<NodeId>,
    /// Honest steps reaching the violation, fewest views first.
    pub steps: Vec<Action>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let byz: Vec<String> = self.byzantine.iter().map(|n| n.to_string()).collect();
        writeln!(
            f,
            "{} violated with byzantine [{}]: {}",
            self.property,
            byz.join(","),
            self.detail
        )?;
        for (i, step) in self.steps.iter().enumerate() {
            writeln!(f, "  {:>2}. {step}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExploreReport {
    /// Distinct boundary states plus in-view vote configurations, summed over
    /// Byzantine placements.
    pub states: usize,
    pub transitions: usize,
    pub placements: usize,
    /// Distinct boundary states entering each view, summed over placements.
    pub boundaries: Vec<usize>,
    pub violation: Option<Violation>,
}

/// Six records of 7 bits: `highest` for the four phases, then `prev` for
/// phases 1 and 2. A record is `1 + view * 8 + value`, 0 when absent.
type Packed = u64;

fn pack_record(r: Option<VoteRecord>) -> u64 {
    r.map_or(0, |r| 1 + r.view.0 * MAX_VALUES as u64 + r.value.0)
}

fn unpack_record(bits: u64) -> Option<VoteRecord> {
    let bits = bits & 0x7f;
    (bits != 0).then(|| {
        VoteRecord::new(
            View((bits - 1) / MAX_VALUES as u64),
            Value((bits - 1) % MAX_VALUES as u64),
        )
    })
}

fn pack(h: &VoteHistory) -> Packed {
    let mut out = 0;
    for (i, phase) in PHASES.into_iter().enumerate() {
        out |= pack_record(h.highest(phase)) << (7 * i);
    }
    out | pack_record(h.prev(Phase::One)) << 28 | pack_record(h.prev(Phase::Two)) << 35
}

fn unpack(bits: Packed) -> VoteHistory {
    let mut h = VoteHistory::new();
    for (i, phase) in PHASES.into_iter().enumerate() {
        if i < 2 {
            if let Some(p) = unpack_record(bits >> (28 + 7 * i)) {
                h.record(phase, p.view, p.value);
            }
        }
        if let Some(r) = unpack_record(bits >> (7 * i)) {
            h.record(phase, r.view, r.value);
        }
    }
    h
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
struct Boundary {
    histories: [Packed; MAX_HONEST],
    /// Bit `x` set once value `x` can be decided.
    decided: u8,
}

/// Votes cast in the current view, stored as `value + 1` (0: none).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
struct Round {
    votes: [[u8; 4]; MAX_HONEST],
    proposal: u8,
    /// Committed Byzantine votes; unused with equivocation.
    byz: [u8; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Propose {
        value: u8,
    },
    /// `commit`: the quorum needs the Byzantine vote of the previous phase,
    /// which is fixed to `value` by this step.
    Vote {
        row: usize,
        phase: usize,
        value: u8,
        commit: bool,
    },
}

/// A boundary state and how it was reached: the parent's votes in `view`
/// were `round`.
struct Node {
    boundary: Boundary,
    parent: u32,
    view: u8,
    round: Round,
    /// New row position -> row position in the parent.
    order: [u8; MAX_HONEST],
}

fn records(view: u64, values: u8) -> Vec<Option<VoteRecord>> {
    let mut out = vec![None];
    for w in 0..view {
        for x in 0..values {
            out.push(Some(VoteRecord::new(View(w), Value(x as u64))));
        }
    }
    out
}

/// Every well-formed (vote, prev, top) triple a Byzantine node can report in
/// `view`.
fn menu(
    view: u64,
    values: u8,
) -> Vec<(Option<VoteRecord>, Option<VoteRecord>, Option<VoteRecord>)> {
    let all = records(view, values);
    let mut out = Vec::new();
    for &vote in &all {
        for &prev in &all {
            let ok = match (vote, prev) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(v), Some(p)) => p.view < v.view && p.value != v.value,
            };
            if !ok {
                continue;
            }
            for &top in &all {
                out.push((vote, prev, top));
            }
        }
    }
    out
}

struct Model {
    cfg: ExploreConfig,
    params: Params,
    honest_ids: Vec<NodeId>,
    byzantine: Vec<NodeId>,
}

/// Values the rules allow in one view from one boundary.
struct Allowed {
    propose: Vec<u8>,
    accept: Vec<u8>,
}

impl Model {
    fn honest(&self) -> usize {
        self.honest_ids.len()
    }

    fn leader_is_honest(&self, view: u64) -> bool {
        !self.byzantine.contains(&leader(View(view), self.cfg.n))
    }

    /// Try every subset of the honest records, alone or together with
    /// Byzantine records from the menu.
    fn search<R: Copy>(
        &self,
        honest: &[R],
        menu: &[R],
        accept: impl Fn(&BTreeMap<NodeId, R>) -> bool,
    ) -> bool {
        let q = self.params.quorum();
        let byz = self.byzantine.len();
        for mask in 0u32..1 << honest.len() {
            let base: BTreeMap<NodeId, R> = (0..honest.len())
                .filter(|k| mask & (1 << k) != 0)
                .map(|k| (self.honest_ids[k], honest[k]))
                .collect();
            if base.len() + byz < q {
                continue;
            }
            if base.len() >= q && accept(&base) {
                return true;
            }
            // With several Byzantine nodes only identical records are tried
            // for all of them; exact for f = 1.
            for byz_count in 1..=byz {
                if base.len() + byz_count < q {
                    continue;
                }
                for &r in menu {
                    let mut set = base.clone();
                    for &b in &self.byzantine[..byz_count] {
                        set.insert(b, r);
                    }
                    if accept(&set) {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn allowed(&self, histories: &[VoteHistory], view: u64) -> Allowed {
        let values = 0..self.cfg.values;
        if view == 0 {
            return Allowed {
                propose: values.clone().collect(),
                accept: values.collect(),
            };
        }
        let suggests: Vec<Suggest> = histories.iter().map(VoteHistory::suggest).collect();
        let proofs: Vec<Proof> = histories.iter().map(VoteHistory::proof).collect();
        let lies = if self.cfg.lying_history {
            menu(view, self.cfg.values)
        } else {
            Vec::new()
        };
        let suggest_menu: Vec<Suggest> = lies
            .iter()
            .map(|&(vote2, prev_vote2, vote3)| Suggest {
                vote2,
                prev_vote2,
                vote3,
            })
            .collect();
        let proof_menu: Vec<Proof> = lies
            .iter()
            .map(|&(vote1, prev_vote1, vote4)| Proof {
                vote1,
                prev_vote1,
                vote4,
            })
            .collect();
        let v = View(view);
        let propose = values
            .clone()
            .filter(|&x| {
                self.search(&suggests, &suggest_menu, |set| {
                    rules::leader_value_is_safe(set, v, Value(x as u64), self.params)
                })
            })
            .collect();
        let accept = values
            .filter(|&x| {
                self.search(&proofs, &proof_menu, |set| {
                    let stats = &mut RuleStats::default();
                    rules::node_check_safe_with(
                        set,
                        v,
                        Value(x as u64),
                        self.params,
                        self.cfg.variant,
                        stats,
                    )
                })
            })
            .collect();
        Allowed { propose, accept }
    }

    fn count(&self, r: &Round, phase: usize, value: u8) -> usize {
        r.votes[..self.honest()]
            .iter()
            .filter(|v| v[phase] == value + 1)
            .count()
    }

    /// Whether `value` has a quorum in `phase`: `Some(commit)` when it does,
    /// where `commit` means the Byzantine vote still has to be fixed.
    fn quorum(&self, r: &Round, phase: usize, value: u8) -> Option<bool> {
        let honest = self.count(r, phase, value);
        if self.params.is_quorum(honest) {
            return Some(false);
        }
        if !self.params.is_quorum(honest + self.byzantine.len()) {
            return None;
        }
        match r.byz[phase] {
            _ if self.cfg.equivocate => Some(false),
            0 => Some(true),
            b if b == value + 1 => Some(false),
            _ => None,
        }
    }

    fn successors(&self, r: &Round, view: u64, allowed: &Allowed) -> Vec<Step> {
        let mut out = Vec::new();
        let honest_leader = self.leader_is_honest(view);
        if honest_leader && r.proposal == 0 {
            out.extend(allowed.propose.iter().map(|&value| Step::Propose { value }));
        }
        for row in 0..self.honest() {
            if r.votes[row][0] == 0 {
                for &value in &allowed.accept {
                    if !honest_leader || r.proposal == value + 1 {
                        out.push(Step::Vote {
                            row,
                            phase: 0,
                            value,
                            commit: false,
                        });
                    }
                }
            }
            for phase in 1..4 {
                if r.votes[row][phase] != 0 {
                    continue;
                }
                for value in 0..self.cfg.values {
                    if let Some(commit) = self.quorum(r, phase - 1, value) {
                        out.push(Step::Vote {
                            row,
                            phase,
                            value,
                            commit,
                        });
                    }
                }
            }
        }
        out
    }

    fn apply(r: &Round, step: Step) -> Round {
        let mut next = *r;
        match step {
            Step::Propose { value } => next.proposal = value + 1,
            Step::Vote {
                row,
                phase,
                value,
                commit,
            } => {
                next.votes[row][phase] = value + 1;
                if commit {
                    next.byz[phase - 1] = value + 1;
                }
            }
        }
        next
    }

    fn within_view(&self, r: &Round, view: u64) -> Option<String> {
        for phase in 1..4 {
            let voted: Vec<u8> = (0..self.cfg.values)
                .filter(|&x| self.count(r, phase, x) > 0)
                .collect();
            if voted.len() > 1 {
                return Some(format!(
                    "honest vote-{} for both {} and {} in view {view}",
                    phase + 1,
                    Value(voted[0] as u64),
                    Value(voted[1] as u64)
                ));
            }
        }
        None
    }

    /// Sets of values that can be decided from `r`. Without equivocation an
    /// uncommitted Byzantine vote-4 helps at most one value.
    fn decisions(&self, r: &Round) -> Vec<u8> {
        let mut sure = 0u8;
        let mut maybe = Vec::new();
        for x in 0..self.cfg.values {
            match self.quorum(r, 3, x) {
                Some(false) => sure |= 1 << x,
                Some(true) => maybe.push(x),
                None => {}
            }
        }
        if maybe.is_empty() {
            vec![sure]
        } else {
            maybe.into_iter().map(|x| sure | 1 << x).collect()
        }
    }

    /// The boundaries after `r` is cast in `view`, sorted, with the row order.
    fn close(&self, b: &Boundary, r: &Round, view: u64) -> Vec<(Boundary, [u8; MAX_HONEST])> {
        let h = self.honest();
        let mut rows = b.histories;
        for (i, row) in rows[..h].iter_mut().enumerate() {
            if r.votes[i] == [0; 4] {
                continue;
            }
            let mut hist = unpack(*row);
            for (p, phase) in PHASES.into_iter().enumerate() {
                if let Some(x) = r.votes[i][p].checked_sub(1) {
                    hist.record(phase, View(view), Value(x as u64));
                }
            }
            *row = pack(&hist);
        }
        let mut order: [u8; MAX_HONEST] = std::array::from_fn(|i| i as u8);
        order[..h].sort_by_key(|&i| rows[i as usize]);
        let mut histories = rows;
        for (pos, &from) in order[..h].iter().enumerate() {
            histories[pos] = rows[from as usize];
        }
        self.decisions(r)
            .into_iter()
            .map(|d| {
                (
                    Boundary {
                        histories,
                        decided: b.decided | d,
                    },
                    order,
                )
            })
            .collect()
    }

    fn liveness_lemma(&self, b: &Boundary, v: u64) -> Option<String> {
        if v == 0 || !self.leader_is_honest(v) {
            return None;
        }
        let h = self.honest();
        let hist: Vec<VoteHistory> = b.histories[..h].iter().map(|&x| unpack(x)).collect();
        let suggests: SuggestSet = self
            .honest_ids
            .iter()
            .zip(&hist)
            .map(|(&id, x)| (id, x.suggest()))
            .collect();
        let proofs: ProofSet = self
            .honest_ids
            .iter()
            .zip(&hist)
            .map(|(&id, x)| (id, x.proof()))
            .collect();
        for init in 0..self.cfg.values {
            let Some(value) =
                rules::leader_pick_safe_value(&suggests, View(v), Value(init as u64), self.params)
            else {
                return Some(format!("honest leader of view {v} finds no safe value"));
            };
            let stats = &mut RuleStats::default();
            if !rules::node_check_safe_with(
                &proofs,
                View(v),
                value,
                self.params,
                self.cfg.variant,
                stats,
            ) {
                return Some(format!(
                    "honest nodes reject the honest leader's {value} in view {v}"
                ));
            }
        }
        None
    }

    fn allowed_at(&self, b: &Boundary, view: u64) -> Allowed {
        let hist: Vec<VoteHistory> = b.histories[..self.honest()]
            .iter()
            .map(|&x| unpack(x))
            .collect();
        self.allowed(&hist, view)
    }

    /// Shortest in-view step sequence from the empty round to `target`.
    fn path_to(&self, b: &Boundary, view: u64, target: &Round) -> Vec<Step> {
        let allowed = self.allowed_at(b, view);
        let mut parents: HashMap<Round, (Round, Step)> = HashMap::new();
        let mut queue = VecDeque::from([Round::default()]);
        while let Some(r) = queue.pop_front() {
            if r == *target {
                return steps_back(&parents, r);
            }
            for step in self.successors(&r, view, &allowed) {
                let succ = Model::apply(&r, step);
                if succ != Round::default() && !parents.contains_key(&succ) {
                    parents.insert(succ, (r, step));
                    queue.push_back(succ);
                }
            }
        }
        unreachable!("recorded round is reachable")
    }

    /// Rebuild the run leading to node `at` (then `tail` in `view`) in terms
    /// of node ids.
    fn concretize(&self, arena: &[Node], at: usize, tail: &[Step], view: u64) -> Vec<Action> {
        let mut chain = vec![at];
        while chain.last() != Some(&0) {
            chain.push(arena[*chain.last().unwrap()].parent as usize);
        }
        chain.reverse();
        let mut who: Vec<NodeId> = self.honest_ids.clone();
        let mut out = Vec::new();
        for &idx in &chain[1..] {
            let node = &arena[idx];
            let parent = &arena[node.parent as usize].boundary;
            let steps = self.path_to(parent, node.view as u64, &node.round);
            self.describe(&mut out, &who, &steps, node.view as u64);
            who = node.order[..self.honest()]
                .iter()
                .map(|&from| who[from as usize])
                .collect();
        }
        self.describe(&mut out, &who, tail, view);
        out
    }

    fn describe(&self, out: &mut Vec<Action>, who: &[NodeId], steps: &[Step], view: u64) {
        let v = View(view);
        if view > 0 {
            out.extend(who.iter().map(|&node| Action::Enter { node, view: v }));
        }
        for &step in steps {
            match step {
                Step::Propose { value } => out.push(Action::Propose {
                    node: leader(v, self.cfg.n),
                    view: v,
                    value: Value(value as u64),
                }),
                Step::Vote {
                    row,
                    phase,
                    value,
                    commit,
                } => {
                    let value = Value(value as u64);
                    if commit {
                        out.push(Action::ByzantineVote {
                            phase: PHASES[phase - 1],
                            view: v,
                            value,
                        });
                    }
                    out.push(Action::Vote {
                        node: who[row],
                        phase: PHASES[phase],
                        view: v,
                        value,
                    });
                }
            }
        }
    }
}

/// Every way to pick `f` of `n` nodes.
fn placements(n: usize, f: usize) -> Vec<Vec<NodeId>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == f)
        .map(|m| {
            (0..n as u32)
                .filter(|i| m & (1 << i) != 0)
                .map(NodeId)
                .collect()
        })
        .collect()
}

fn steps_back(parents: &HashMap<Round, (Round, Step)>, mut r: Round) -> Vec<Step> {
    let mut steps = Vec::new();
    while let Some(&(prev, step)) = parents.get(&r) {
        steps.push(step);
        r = prev;
    }
    steps.reverse();
    steps
}

/// Explore every reachable state for every placement of `f` Byzantine nodes,
/// stopping at the first violation.
pub fn explore(cfg: ExploreConfig) -> Result<ExploreReport, String> {
    let params = cfg.validate()?;
    let mut report = ExploreReport {
        boundaries: vec![0; cfg.views as usize],
        ..Default::default()
    };
    for byzantine in placements(cfg.n, cfg.f) {
        report.placements += 1;
        let honest_ids = params
            .nodes()
            .filter(|id| !byzantine.contains(id))
            .collect();
        let model = Model {
            cfg,
            params,
            honest_ids,
            byzantine,
        };
        if let Some(v) = explore_placement(&model, &mut report) {
            report.violation = Some(v);
            return Ok(report);
        }
    }
    Ok(report)
}

fn explore_placement(model: &Model, report: &mut ExploreReport) -> Option<Violation> {
    let violation = |property, detail, steps| Violation {
        property,
        detail,
        byzantine: model.byzantine.clone(),
        steps,
    };
    let root = Node {
        boundary: Boundary::default(),
        parent: 0,
        view: 0,
        round: Round::default(),
        order: std::array::from_fn(|i| i as u8),
    };
    let mut arena: Vec<Node> = vec![root];
    let mut layer: Vec<usize> = vec![0];
    for view in 0..model.cfg.views {
        report.boundaries[view as usize] += layer.len();
        report.states += layer.len();
        // Boundaries sharing histories are adjacent, so one cached rule
        // evaluation serves all of them.
        layer.sort_by_key(|&i| (arena[i].boundary.histories, i));
        let mut next: HashMap<Boundary, u32> = HashMap::new();
        let mut cached: Option<([Packed; MAX_HONEST], Allowed)> = None;
        for &at in &layer {
            let b = arena[at].boundary;
            if let Some(detail) = model.liveness_lemma(&b, view) {
                return Some(violation(
                    "liveness-lemma",
                    detail,
                    model.concretize(&arena, at, &[], view),
                ));
            }
            if cached.as_ref().is_none_or(|(h, _)| *h != b.histories) {
                cached = Some((b.histories, model.allowed_at(&b, view)));
            }
            let allowed = &cached.as_ref().unwrap().1;
            let mut parents: HashMap<Round, (Round, Step)> = HashMap::new();
            let mut queue = VecDeque::from([Round::default()]);
            while let Some(r) = queue.pop_front() {
                report.states += 1;
                if let Some(detail) = model.within_view(&r, view) {
                    let steps = model.concretize(&arena, at, &steps_back(&parents, r), view);
                    return Some(violation("within-view", detail, steps));
                }
                for (closed, order) in model.close(&b, &r, view) {
                    if closed.decided.count_ones() > 1 {
                        let values: Vec<String> = (0..MAX_VALUES)
                            .filter(|x| closed.decided & (1 << x) != 0)
                            .map(|x| Value(x as u64).to_string())
                            .collect();
                        let detail = format!("values {} can both be decided", values.join(" and "));
                        let steps = model.concretize(&arena, at, &steps_back(&parents, r), view);
                        return Some(violation("agreement", detail, steps));
                    }
                    if view + 1 < model.cfg.views && !next.contains_key(&closed) {
                        next.insert(closed, arena.len() as u32);
                        arena.push(Node {
                            boundary: closed,
                            parent: at as u32,
                            view: view as u8,
                            round: r,
                            order,
                        });
                    }
                }
                for step in model.successors(&r, view, allowed) {
                    report.transitions += 1;
                    let succ = Model::apply(&r, step);
                    if succ != Round::default() && !parents.contains_key(&succ) {
                        parents.insert(succ, (r, step));
                        queue.push_back(succ);
                    }
                }
            }
        }
        layer = next.into_values().map(|i| i as usize).collect();
    }
    None
}
