//! Byzantine behaviours, implemented as wrappers around an honest node.
//!
//! The wrapped node runs the real protocol; the wrapper rewrites, splits or
//! suppresses what it sends. Outbound messages always carry the wrapper's own
//! id as claimed sender, so the simulator can verify that no strategy forges
//! another node's identity.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::message::{Block, Message, MessageKind, Proof, SlotMessage, Suggest, WireMessage};
use crate::multishot::slot_leader;
use crate::node::leader;
use crate::protocol::{Dest, Effects, Note, Outbound, Protocol, StorageSample, TimerKey};
use crate::types::{NodeId, Slot, Value, View, VoteRecord};

use super::scenario::{AdversaryConfig, Strategy};

/// Message rewriting hooks the strategies need.
pub trait Tamper: WireMessage {
    /// Value carried by a proposal or vote.
    fn carried_value(&self) -> Option<Value>;
    /// Same message carrying another value. Messages without a value are
    /// returned unchanged.
    fn with_value(&self, value: Value) -> Self;
    /// Suggest/proof with its three records replaced.
    fn with_records(&self, records: [Option<VoteRecord>; 3]) -> Self;
    /// A view change for `view` in the same slot.
    fn view_change(&self, view: View) -> Self;
    /// A fresh proposal for `view` in the same slot, when one can be forged
    /// without protocol context.
    fn proposal(&self, view: View, value: Value) -> Option<Self>;
    fn leader(&self, n: usize) -> NodeId;
}

impl Tamper for Message {
    fn carried_value(&self) -> Option<Value> {
        match *self {
            Message::Proposal { value, .. } | Message::Vote { value, .. } => Some(value),
            _ => None,
        }
    }

    fn with_value(&self, value: Value) -> Self {
        match *self {
            Message::Proposal { view, .. } => Message::Proposal { view, value },
            Message::Vote { phase, view, .. } => Message::Vote { phase, view, value },
            other => other,
        }
    }

    fn with_records(&self, [a, b, c]: [Option<VoteRecord>; 3]) -> Self {
        match *self {
            Message::Suggest { view, .. } => Message::Suggest {
                view,
                suggest: Suggest {
                    vote2: a,
                    prev_vote2: b,
                    vote3: c,
                },
            },
            Message::Proof { view, .. } => Message::Proof {
                view,
                proof: Proof {
                    vote1: a,
                    prev_vote1: b,
                    vote4: c,
                },
            },
            other => other,
        }
    }

    fn view_change(&self, view: View) -> Self {
        Message::ViewChange { view }
    }

    fn proposal(&self, view: View, value: Value) -> Option<Self> {
        Some(Message::Proposal { view, value })
    }

    fn leader(&self, n: usize) -> NodeId {
        leader(Message::view(self), n)
    }
}

impl Tamper for SlotMessage {
    fn carried_value(&self) -> Option<Value> {
        match *self {
            SlotMessage::Proposal { block, .. } => Some(block.id()),
            SlotMessage::Vote { value, .. } => Some(value),
            _ => None,
        }
    }

    fn with_value(&self, value: Value) -> Self {
        match *self {
            // The payload changes, so the block gets a different id.
            SlotMessage::Proposal {
                view,
                block,
                parent_view,
            } => SlotMessage::Proposal {
                view,
                block: Block::new(block.slot, value.0, block.parent),
                parent_view,
            },
            SlotMessage::Vote { slot, view, .. } => SlotMessage::Vote { slot, view, value },
            other => other,
        }
    }

    fn with_records(&self, [a, b, c]: [Option<VoteRecord>; 3]) -> Self {
        match *self {
            SlotMessage::Suggest { slot, view, .. } => SlotMessage::Suggest {
                slot,
                view,
                suggest: Suggest {
                    vote2: a,
                    prev_vote2: b,
                    vote3: c,
                },
            },
            SlotMessage::Proof { slot, view, .. } => SlotMessage::Proof {
                slot,
                view,
                proof: Proof {
                    vote1: a,
                    prev_vote1: b,
                    vote4: c,
                },
            },
            other => other,
        }
    }

    fn view_change(&self, view: View) -> Self {
        SlotMessage::ViewChange {
            slot: SlotMessage::slot(self),
            view,
        }
    }

    fn proposal(&self, _view: View, _value: Value) -> Option<Self> {
        // A block needs a parent the honest nodes have notarized; forging one
        // from nothing would only be ignored.
        None
    }

    fn leader(&self, n: usize) -> NodeId {
        slot_leader(SlotMessage::slot(self), SlotMessage::view(self), n)
    }
}

/// An honest node whose outbound traffic is rewritten by a strategy.
pub struct Byzantine<P: Protocol> {
    inner: P,
    cfg: AdversaryConfig,
    n: usize,
    rng: ChaCha8Rng,
    sent: usize,
    crashed: bool,
    /// Highest (slot, view) the wrapped node has sent anything for.
    entered: Option<(Option<Slot>, View)>,
    values: Vec<Value>,
}

impl<P: Protocol> Byzantine<P>
where
    P::Msg: Tamper,
{
    /// `values` is the domain invented values are drawn from when the config
    /// lists none.
    pub fn new(inner: P, cfg: AdversaryConfig, n: usize, seed: u64, values: Vec<Value>) -> Self {
        let values = if cfg.values.is_empty() {
            values
        } else {
            cfg.values.iter().copied().map(Value).collect()
        };
        let id = inner.id();
        Byzantine {
            inner,
            cfg,
            n,
            rng: ChaCha8Rng::seed_from_u64(
                seed ^ (u64::from(id.0) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            ),
            sent: 0,
            crashed: false,
            entered: None,
            values,
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.cfg.strategy
    }

    fn id(&self) -> NodeId {
        self.inner.id()
    }

    fn other_value(&mut self, not: Value) -> Value {
        let choices: Vec<Value> = self.values.iter().copied().filter(|&v| v != not).collect();
        choices
            .choose(&mut self.rng)
            .copied()
            .unwrap_or(Value(not.0.wrapping_add(1)))
    }

    fn any_value(&mut self) -> Value {
        self.values
            .choose(&mut self.rng)
            .copied()
            .unwrap_or(Value(self.rng.gen_range(1..4)))
    }

    fn random_record(&mut self, below: View) -> Option<VoteRecord> {
        if self.rng.gen_bool(0.25) {
            return None;
        }
        // Mostly plausible views, occasionally one from the future.
        let view = if below.0 == 0 || self.rng.gen_bool(0.1) {
            View(below.0 + self.rng.gen_range(0..3))
        } else {
            View(self.rng.gen_range(0..below.0))
        };
        Some(VoteRecord::new(view, self.any_value()))
    }

    fn emit(&mut self, out: &mut Effects<P::Msg>, dest: Dest, msg: P::Msg) {
        out.outbound.push(Outbound {
            dest,
            msg,
            claimed_sender: Some(self.id()),
        });
        self.sent += 1;
    }

    fn per_destination(
        &mut self,
        out: &mut Effects<P::Msg>,
        msg: &P::Msg,
        action: &'static str,
        mut rewrite: impl FnMut(&mut Self, NodeId, &P::Msg) -> P::Msg,
    ) {
        for d in 0..self.n as u32 {
            let to = NodeId(d);
            let forged = if to == self.id() {
                msg.clone()
            } else {
                rewrite(self, to, msg)
            };
            if forged != *msg {
                out.note(Note::Adversary {
                    action,
                    detail: format!("to={to} sent={forged} honest={msg}"),
                });
            }
            self.emit(out, Dest::To(to), forged);
        }
    }

    fn transform(&mut self, inner: Effects<P::Msg>, out: &mut Effects<P::Msg>) {
        out.timers.extend(inner.timers);
        out.notes.extend(inner.notes);
        for ob in inner.outbound {
            if self.crashed {
                break;
            }
            if self.cfg.strategy == Strategy::CrashAfterK && self.sent >= self.cfg.k {
                self.crashed = true;
                out.note(Note::Adversary {
                    action: "crash",
                    detail: format!("after={}", self.sent),
                });
                break;
            }
            self.observe_view(&ob.msg, out);
            let msg = ob.msg;
            let broadcast = ob.dest == Dest::Broadcast;
            match self.cfg.strategy {
                Strategy::EquivocateVotes if broadcast && msg.carried_value().is_some() => {
                    let honest = msg.carried_value().expect("checked");
                    let alt = self.other_value(honest);
                    let half = self.n as u32 / 2;
                    self.per_destination(out, &msg, "equivocate", |_, to, m| {
                        if to.0 < half {
                            m.clone()
                        } else {
                            m.with_value(alt)
                        }
                    });
                }
                Strategy::LyingLeader if msg.kind() == MessageKind::Proposal => {
                    if broadcast {
                        self.per_destination(out, &msg, "lying-proposal", |s, _, m| {
                            let v = s.any_value();
                            m.with_value(v)
                        });
                    } else {
                        let v = self.any_value();
                        self.emit(out, ob.dest, msg.with_value(v));
                    }
                }
                Strategy::LyingHistory
                    if matches!(msg.kind(), MessageKind::Suggest | MessageKind::Proof) =>
                {
                    let view = msg.view();
                    let targets: Vec<Dest> = match ob.dest {
                        Dest::Broadcast => {
                            (0..self.n as u32).map(|d| Dest::To(NodeId(d))).collect()
                        }
                        d => vec![d],
                    };
                    for dest in targets {
                        let records = [
                            self.random_record(view),
                            self.random_record(view),
                            self.random_record(view),
                        ];
                        let forged = msg.with_records(records);
                        out.note(Note::Adversary {
                            action: "lying-history",
                            detail: format!("{dest:?} sent={forged}"),
                        });
                        self.emit(out, dest, forged);
                    }
                }
                _ => self.emit(out, ob.dest, msg),
            }
        }
    }

    /// React to the wrapped node moving into a new (slot, view).
    fn observe_view(&mut self, msg: &P::Msg, out: &mut Effects<P::Msg>) {
        let key = (msg.slot(), msg.view());
        if self.entered.is_some_and(|e| e >= key) {
            return;
        }
        self.entered = Some(key);
        match self.cfg.strategy {
            Strategy::VcSpammer => {
                for k in 1..=self.cfg.burst {
                    let vc = msg.view_change(View(key.1 .0 + k));
                    out.note(Note::Adversary {
                        action: "vc-spam",
                        detail: format!("sent={vc}"),
                    });
                    self.emit(out, Dest::Broadcast, vc);
                }
            }
            // Propose garbage as soon as the view starts instead of waiting
            // for suggestions.
            Strategy::LyingLeader
                if msg.kind() == MessageKind::Proof && msg.leader(self.n) == self.id() =>
            {
                for d in 0..self.n as u32 {
                    let value = self.any_value();
                    if let Some(p) = msg.proposal(key.1, value) {
                        out.note(Note::Adversary {
                            action: "lying-proposal",
                            detail: format!("to={d} sent={p}"),
                        });
                        self.emit(out, Dest::To(NodeId(d)), p);
                    }
                }
            }
            _ => {}
        }
    }
}

impl<P: Protocol> Protocol for Byzantine<P>
where
    P::Msg: Tamper,
{
    type Msg = P::Msg;

    fn id(&self) -> NodeId {
        self.inner.id()
    }

    fn start(&mut self, fx: &mut Effects<P::Msg>) {
        if self.cfg.strategy == Strategy::Silent {
            fx.note(Note::Adversary {
                action: "silent",
                detail: "never sends".into(),
            });
            return;
        }
        let mut inner = Effects::new();
        self.inner.start(&mut inner);
        self.transform(inner, fx);
    }

    fn on_message(&mut self, from: NodeId, msg: P::Msg, fx: &mut Effects<P::Msg>) {
        if self.cfg.strategy == Strategy::Silent || self.crashed {
            return;
        }
        let mut inner = Effects::new();
        self.inner.on_message(from, msg, &mut inner);
        self.transform(inner, fx);
    }

    fn on_timer(&mut self, key: TimerKey, fx: &mut Effects<P::Msg>) {
        if self.cfg.strategy == Strategy::Silent || self.crashed {
            return;
        }
        let mut inner = Effects::new();
        self.inner.on_timer(key, &mut inner);
        self.transform(inner, fx);
    }

    fn storage(&self) -> StorageSample {
        self.inner.storage()
    }
}
