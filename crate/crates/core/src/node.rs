//! Single-shot TetraBFT node.

use std::collections::{BTreeMap, BTreeSet};

use crate::message::{Message, Suggest};
use crate::protocol::{Effects, Note, Protocol, StorageSample, TimerKey};
use crate::rules::{self, ProofSet, RuleStats, RuleVariant, SuggestSet};
use crate::types::{NodeId, Params, Phase, Ticks, Value, View, VoteHistory};

/// Views ahead of the current one for which messages are retained.
pub const VIEW_WINDOW: usize = 8;

/// Timeout per view, in units of the delay bound.
pub const TIMEOUT_DELTAS: u64 = 9;

const VIEW_TIMER: TimerKey = TimerKey(0);

pub fn leader(view: View, n: usize) -> NodeId {
    NodeId((view.0 % n as u64) as u32)
}

#[derive(Clone, Copy, Debug)]
pub struct NodeConfig {
    pub id: NodeId,
    pub params: Params,
    /// The network delay bound Δ in ticks.
    pub delta_bound: Ticks,
    pub initial_value: Value,
    pub variant: RuleVariant,
}

impl NodeConfig {
    pub fn new(id: NodeId, params: Params, delta_bound: Ticks, initial_value: Value) -> Self {
        NodeConfig {
            id,
            params,
            delta_bound,
            initial_value,
            variant: RuleVariant::Full,
        }
    }
}

/// Per-view state, discarded on every view change.
#[derive(Clone, Debug, Default)]
struct Round {
    proposal: Option<Value>,
    proposed: bool,
    suggests: SuggestSet,
    proofs: ProofSet,
    /// First vote of each sender, per phase.
    votes: [BTreeMap<NodeId, Value>; 4],
    sent: [bool; 4],
}

impl Round {
    fn tally(&self, phase: Phase, value: Value) -> usize {
        self.votes[phase.number() as usize - 1]
            .values()
            .filter(|v| **v == value)
            .count()
    }

    fn entries(&self) -> usize {
        self.suggests.len()
            + self.proofs.len()
            + self.votes.iter().map(BTreeMap::len).sum::<usize>()
    }
}

/// Messages that arrived for a view this node has not reached yet.
#[derive(Clone, Debug, Default)]
struct FutureBuffer {
    views: BTreeMap<View, BTreeMap<(NodeId, u8), Message>>,
}

impl FutureBuffer {
    fn slot_of(msg: &Message) -> u8 {
        match msg {
            Message::Proposal { .. } => 0,
            Message::Vote { phase, .. } => phase.number(),
            Message::Suggest { .. } => 5,
            Message::Proof { .. } => 6,
            Message::ViewChange { .. } => 7,
        }
    }

    fn push(&mut self, from: NodeId, msg: Message) {
        let view = msg.view();
        if !self.views.contains_key(&view) && self.views.len() >= VIEW_WINDOW {
            match self.views.keys().next_back() {
                Some(&highest) if highest > view => {
                    self.views.remove(&highest);
                }
                _ => return,
            }
        }
        self.views
            .entry(view)
            .or_default()
            .entry((from, Self::slot_of(&msg)))
            .or_insert(msg);
    }

    /// Removes everything at or below `view`, returning the messages for `view`.
    fn take(&mut self, view: View) -> Vec<(NodeId, Message)> {
        let keep = self.views.split_off(&view.next());
        let taken = std::mem::replace(&mut self.views, keep);
        taken
            .into_iter()
            .filter(|(v, _)| *v == view)
            .flat_map(|(_, msgs)| msgs.into_iter().map(|((from, _), m)| (from, m)))
            .collect()
    }

    fn len(&self) -> usize {
        self.views.values().map(BTreeMap::len).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    cfg: NodeConfig,
    view: View,
    decided: Option<Value>,
    history: VoteHistory,
    round: Round,
    /// View-change senders for views above the current one.
    view_changes: BTreeMap<View, BTreeSet<NodeId>>,
    highest_vc_sent: View,
    future: FutureBuffer,
    stats: RuleStats,
}

impl Node {
    pub fn new(cfg: NodeConfig) -> Self {
        Node {
            cfg,
            view: View::ZERO,
            decided: None,
            history: VoteHistory::new(),
            round: Round::default(),
            view_changes: BTreeMap::new(),
            highest_vc_sent: View::ZERO,
            future: FutureBuffer::default(),
            stats: RuleStats::default(),
        }
    }

    pub fn view(&self) -> View {
        self.view
    }

    pub fn decided(&self) -> Option<Value> {
        self.decided
    }

    pub fn history(&self) -> &VoteHistory {
        &self.history
    }

    pub fn rule_stats(&self) -> RuleStats {
        self.stats
    }

    fn params(&self) -> Params {
        self.cfg.params
    }

    fn leader(&self, view: View) -> NodeId {
        leader(view, self.params().n())
    }

    fn timeout(&self) -> Ticks {
        TIMEOUT_DELTAS * self.cfg.delta_bound
    }

    fn enter_view(&mut self, view: View, fx: &mut Effects<Message>) {
        self.view = view;
        self.round = Round::default();
        self.view_changes = self.view_changes.split_off(&view.next());
        fx.set_timer(VIEW_TIMER, self.timeout());
        if view.is_zero() {
            if self.leader(view) == self.cfg.id {
                self.round.proposed = true;
                fx.broadcast(Message::Proposal {
                    view,
                    value: self.cfg.initial_value,
                });
            }
        } else {
            fx.broadcast(Message::Proof {
                view,
                proof: self.history.proof(),
            });
            fx.send(
                self.leader(view),
                Message::Suggest {
                    view,
                    suggest: self.history.suggest(),
                },
            );
        }
        for (from, msg) in self.future.take(view) {
            self.handle_current(from, msg, fx);
        }
    }

    fn handle_current(&mut self, from: NodeId, msg: Message, fx: &mut Effects<Message>) {
        match msg {
            Message::Proposal { value, .. } => self.on_proposal(from, value, fx),
            Message::Vote { phase, value, .. } => self.on_vote(from, phase, value, fx),
            Message::Suggest { suggest, .. } => self.on_suggest(from, suggest, fx),
            Message::Proof { proof, .. } => {
                self.round.proofs.entry(from).or_insert(proof);
                self.try_vote1(fx);
            }
            Message::ViewChange { .. } => {}
        }
    }

    fn on_proposal(&mut self, from: NodeId, value: Value, fx: &mut Effects<Message>) {
        if from != self.leader(self.view) {
            fx.note(Note::Ignored {
                from,
                reason: "proposal-from-non-leader",
            });
            return;
        }
        match self.round.proposal {
            None => self.round.proposal = Some(value),
            Some(seen) if seen != value => {
                fx.note(Note::Ignored {
                    from,
                    reason: "equivocating-proposal",
                });
                return;
            }
            Some(_) => return,
        }
        self.try_vote1(fx);
    }

    fn on_suggest(&mut self, from: NodeId, suggest: Suggest, fx: &mut Effects<Message>) {
        if self.leader(self.view) != self.cfg.id {
            fx.note(Note::Ignored {
                from,
                reason: "misdirected-suggest",
            });
            return;
        }
        if self.round.suggests.contains_key(&from) {
            return;
        }
        self.round.suggests.insert(from, suggest);
        if self.round.proposed {
            return;
        }
        let picked = rules::leader_pick_safe_value_counted(
            &self.round.suggests,
            self.view,
            self.cfg.initial_value,
            self.params(),
            &mut self.stats,
        );
        if let Some(value) = picked {
            self.round.proposed = true;
            fx.broadcast(Message::Proposal {
                view: self.view,
                value,
            });
        }
    }

    fn try_vote1(&mut self, fx: &mut Effects<Message>) {
        let Some(value) = self.round.proposal else {
            return;
        };
        if self.round.sent[0] {
            return;
        }
        let safe = self.view.is_zero()
            || rules::node_check_safe_with(
                &self.round.proofs,
                self.view,
                value,
                self.params(),
                self.cfg.variant,
                &mut self.stats,
            );
        if safe {
            self.send_vote(Phase::One, value, fx);
        }
    }

    fn send_vote(&mut self, phase: Phase, value: Value, fx: &mut Effects<Message>) {
        self.round.sent[phase.number() as usize - 1] = true;
        self.history.record(phase, self.view, value);
        fx.broadcast(Message::Vote {
            phase,
            view: self.view,
            value,
        });
    }

    fn on_vote(&mut self, from: NodeId, phase: Phase, value: Value, fx: &mut Effects<Message>) {
        let idx = phase.number() as usize - 1;
        match self.round.votes[idx].get(&from) {
            Some(first) if *first != value => {
                fx.note(Note::Ignored {
                    from,
                    reason: "equivocating-vote",
                });
                return;
            }
            Some(_) => return,
            None => {
                self.round.votes[idx].insert(from, value);
            }
        }
        if !self.params().is_quorum(self.round.tally(phase, value)) {
            return;
        }
        match phase.next() {
            Some(next) if !self.round.sent[idx + 1] => self.send_vote(next, value, fx),
            Some(_) => {}
            None => {
                if self.decided.is_none() {
                    self.decided = Some(value);
                    fx.note(Note::Decide {
                        value,
                        view: self.view,
                    });
                }
            }
        }
    }

    fn on_view_change(&mut self, from: NodeId, target: View, fx: &mut Effects<Message>) {
        if target <= self.view {
            return;
        }
        if !self.view_changes.contains_key(&target) && self.view_changes.len() >= VIEW_WINDOW {
            // Keep the lowest views: those are the ones that can complete first.
            match self.view_changes.keys().next_back() {
                Some(&highest) if highest > target => {
                    self.view_changes.remove(&highest);
                }
                _ => return,
            }
        }
        let senders = self.view_changes.entry(target).or_default();
        senders.insert(from);
        let count = senders.len();
        if self.params().is_blocking(count) && self.highest_vc_sent < target {
            self.highest_vc_sent = target;
            fx.broadcast(Message::ViewChange { view: target });
        }
        if self.params().is_quorum(count) {
            self.enter_view(target, fx);
        }
    }
}

impl Protocol for Node {
    type Msg = Message;

    fn id(&self) -> NodeId {
        self.cfg.id
    }

    fn start(&mut self, fx: &mut Effects<Message>) {
        self.enter_view(View::ZERO, fx);
    }

    fn on_message(&mut self, from: NodeId, msg: Message, fx: &mut Effects<Message>) {
        if let Message::ViewChange { view } = msg {
            self.on_view_change(from, view, fx);
            return;
        }
        let view = msg.view();
        if view == self.view {
            self.handle_current(from, msg, fx);
        } else if view > self.view {
            self.future.push(from, msg);
        }
    }

    fn on_timer(&mut self, key: TimerKey, fx: &mut Effects<Message>) {
        // Decided nodes keep changing views: a node that missed the decision
        // can only catch up in a later view, which needs n - f participants.
        if key != VIEW_TIMER {
            return;
        }
        let target = self.view.next();
        if self.highest_vc_sent < target {
            self.highest_vc_sent = target;
        }
        fx.broadcast(Message::ViewChange { view: target });
    }

    fn storage(&self) -> StorageSample {
        StorageSample {
            // history + current view + highest view-change sent + decision
            persistent_bytes: VoteHistory::ENCODED_LEN + 8 + 8 + 9,
            volatile_entries: self.round.entries()
                + self.view_changes.values().map(BTreeSet::len).sum::<usize>()
                + self.future.len(),
            active_slots: 0,
            progress: self.view.0,
        }
    }
}
