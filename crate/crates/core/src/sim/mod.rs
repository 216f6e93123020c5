//! Deterministic discrete-event simulator.
//!
//! Time is an integer tick counter. Events due at the same tick run in the
//! order they were scheduled. Every random choice (drops, delays, adversary
//! moves) comes from generators seeded by the scenario, so a scenario always
//! produces the same trace.

pub mod adversary;
pub mod batch;
pub mod latency;
pub mod scenario;
pub mod trace;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::message::{Message, SlotMessage, WireMessage};
use crate::multishot::{MultiConfig, MultiNode};
use crate::node::{Node, NodeConfig};
use crate::protocol::{Dest, Effects, Protocol, StorageSample, TimerKey, TimerOp};
use crate::rules::RuleVariant;
use crate::types::{NodeId, Ticks, Value};

pub use adversary::{Byzantine, Tamper};
pub use batch::{run_batch, BatchRow};
pub use latency::{measure_latency, Latency, Selector};
pub use scenario::{AdversaryConfig, Delay, DelayModel, Filter, Mode, Scenario, Strategy};
pub use trace::{Event, Trace, TraceEvent, TraceMeta};

/// Hard stop for runaway runs (e.g. a huge horizon with a spamming adversary).
pub const MAX_EVENTS: usize = 2_000_000;

pub type BoxedNode<M> = Box<dyn Protocol<Msg = M>>;

/// Run a scenario with the full safety rules.
pub fn run(scenario: &Scenario) -> Trace {
    run_with_variant(scenario, RuleVariant::Full)
}

/// Run a scenario with every honest node using `variant` of the safety rules.
pub fn run_with_variant(scenario: &Scenario, variant: RuleVariant) -> Trace {
    match scenario.mode {
        Mode::Single => simulate(scenario, single_shot_nodes(scenario, variant)),
        Mode::Multi => simulate(scenario, multi_shot_nodes(scenario, variant)),
    }
}

fn value_domain(scenario: &Scenario) -> Vec<Value> {
    let mut values: Vec<Value> = (0..scenario.n as u32)
        .map(|i| scenario.initial_value(NodeId(i)))
        .collect();
    values.sort_unstable();
    values.dedup();
    let top = values.last().map_or(1, |v| v.0);
    values.push(Value(top + 1));
    values
}

pub fn single_shot_nodes(scenario: &Scenario, variant: RuleVariant) -> Vec<BoxedNode<Message>> {
    let params = scenario.params().expect("validated scenario");
    let domain = value_domain(scenario);
    (0..scenario.n as u32)
        .map(NodeId)
        .map(|id| {
            let cfg = NodeConfig {
                variant,
                ..NodeConfig::new(id, params, scenario.delta_bound, scenario.initial_value(id))
            };
            let node = Node::new(cfg);
            if scenario.is_byzantine(id) {
                Box::new(Byzantine::new(
                    node,
                    scenario.adversary(),
                    scenario.n,
                    scenario.seed,
                    domain.clone(),
                )) as BoxedNode<Message>
            } else {
                Box::new(node)
            }
        })
        .collect()
}

pub fn multi_shot_nodes(scenario: &Scenario, variant: RuleVariant) -> Vec<BoxedNode<SlotMessage>> {
    let params = scenario.params().expect("validated scenario");
    (0..scenario.n as u32)
        .map(NodeId)
        .map(|id| {
            let cfg = MultiConfig {
                variant,
                last_slot: scenario.last_slot(),
                ..MultiConfig::new(id, params, scenario.delta_bound)
            };
            let node = MultiNode::new(cfg);
            if scenario.is_byzantine(id) {
                let domain = vec![Value(0xbad0), Value(0xbad1), Value(0xbad2)];
                Box::new(Byzantine::new(
                    node,
                    scenario.adversary(),
                    scenario.n,
                    scenario.seed,
                    domain,
                )) as BoxedNode<SlotMessage>
            } else {
                Box::new(node)
            }
        })
        .collect()
}

pub fn meta(scenario: &Scenario) -> TraceMeta {
    TraceMeta {
        mode: scenario.mode,
        n: scenario.n,
        f: scenario.f,
        delta_bound: scenario.delta_bound,
        delay: scenario.post_gst_delay(),
        gst: scenario.gst,
        horizon: scenario.horizon,
        seed: scenario.seed,
        byzantine: scenario.byzantine.iter().copied().map(NodeId).collect(),
        inputs: (0..scenario.n as u32)
            .map(|i| scenario.initial_value(NodeId(i)))
            .collect(),
        last_slot: scenario.last_slot(),
    }
}

enum Pending<M> {
    Deliver {
        id: u64,
        from: NodeId,
        to: NodeId,
        msg: M,
    },
    Timer {
        node: NodeId,
        key: TimerKey,
        generation: u64,
    },
}

struct Scheduled<M> {
    t: Ticks,
    seq: u64,
    what: Pending<M>,
}

impl<M> PartialEq for Scheduled<M> {
    fn eq(&self, other: &Self) -> bool {
        (self.t, self.seq) == (other.t, other.seq)
    }
}

impl<M> Eq for Scheduled<M> {}

impl<M> PartialOrd for Scheduled<M> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<M> Ord for Scheduled<M> {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.t, other.seq).cmp(&(self.t, self.seq))
    }
}

struct Sampler {
    last: StorageSample,
    peak_volatile: usize,
}

struct Engine<'a, M: WireMessage> {
    scenario: &'a Scenario,
    rng: ChaCha8Rng,
    queue: BinaryHeap<Scheduled<M>>,
    seq: u64,
    next_msg: u64,
    timers: HashMap<(NodeId, TimerKey), u64>,
    generation: u64,
    samplers: Vec<Option<Sampler>>,
    events: Vec<TraceEvent>,
}

impl<M: WireMessage> Engine<'_, M> {
    fn push(&mut self, t: Ticks, what: Pending<M>) {
        self.seq += 1;
        self.queue.push(Scheduled {
            t,
            seq: self.seq,
            what,
        });
    }

    fn log(&mut self, t: Ticks, event: Event) {
        self.events.push(TraceEvent { t, event });
    }

    fn delay(&mut self, t: Ticks) -> Ticks {
        if t < self.scenario.gst {
            if let Some(max) = self.scenario.pre_gst_delay_max {
                return self.rng.gen_range(1..=max);
            }
        }
        match self.scenario.post_gst_delay() {
            Delay::Constant(d) => d,
            Delay::Uniform(max) => self.rng.gen_range(1..=max),
        }
    }

    /// Why a message sent at `t` is lost, if it is.
    fn drop_reason(&mut self, t: Ticks, from: NodeId, to: NodeId, msg: &M) -> Option<&'static str> {
        if t >= self.scenario.gst || from == to {
            return None;
        }
        if self
            .scenario
            .schedule
            .as_ref()
            .is_some_and(|f| f.matches(from, to, msg))
        {
            return Some("schedule");
        }
        if self.scenario.pre_gst_drop > 0.0 && self.rng.gen_bool(self.scenario.pre_gst_drop) {
            return Some("pre-gst");
        }
        None
    }

    fn apply(&mut self, t: Ticks, node: NodeId, fx: Effects<M>) {
        for note in fx.notes {
            self.log(t, Event::from_note(node, note));
        }
        for ob in fx.outbound {
            if let Some(claimed) = ob.claimed_sender {
                assert_eq!(claimed, node, "node {node} tried to send as {claimed}");
            }
            let targets: Vec<NodeId> = match ob.dest {
                Dest::Broadcast => (0..self.scenario.n as u32).map(NodeId).collect(),
                Dest::To(to) => {
                    assert!(
                        to.index() < self.scenario.n,
                        "node {node} sent to unknown node {to}"
                    );
                    vec![to]
                }
            };
            let text = ob.msg.to_string();
            for to in targets {
                self.next_msg += 1;
                let id = self.next_msg;
                self.log(
                    t,
                    Event::Send {
                        node,
                        to,
                        id,
                        msg: text.clone(),
                    },
                );
                match self.drop_reason(t, node, to, &ob.msg) {
                    Some(reason) => self.log(
                        t,
                        Event::Drop {
                            node,
                            to,
                            id,
                            reason: reason.into(),
                        },
                    ),
                    None => {
                        let at = t + self.delay(t);
                        self.push(
                            at,
                            Pending::Deliver {
                                id,
                                from: node,
                                to,
                                msg: ob.msg.clone(),
                            },
                        );
                    }
                }
            }
        }
        for op in fx.timers {
            self.generation += 1;
            match op {
                TimerOp::Set { key, after } => {
                    self.timers.insert((node, key), self.generation);
                    let at = t + after;
                    self.log(t, Event::TimerSet { node, key, at });
                    self.push(
                        at,
                        Pending::Timer {
                            node,
                            key,
                            generation: self.generation,
                        },
                    );
                }
                TimerOp::Cancel { key } => {
                    self.timers.remove(&(node, key));
                }
            }
        }
    }

    fn sample(&mut self, t: Ticks, node: NodeId, now: StorageSample, force: bool) {
        let slot = &mut self.samplers[node.index()];
        let changed = match slot {
            None => true,
            Some(s) => {
                s.peak_volatile = s.peak_volatile.max(now.volatile_entries);
                s.last.progress != now.progress
                    || s.last.persistent_bytes != now.persistent_bytes
                    || s.last.active_slots != now.active_slots
            }
        };
        if !(changed || force) {
            return;
        }
        let volatile = slot
            .as_ref()
            .map_or(now.volatile_entries, |s| s.peak_volatile);
        *slot = Some(Sampler {
            last: now,
            peak_volatile: now.volatile_entries,
        });
        self.log(
            t,
            Event::Sample {
                node,
                persistent: now.persistent_bytes,
                volatile,
                slots: now.active_slots,
                progress: now.progress,
            },
        );
    }
}

/// Drive `nodes` (indexed by id) through the scenario's network.
pub fn simulate<M: WireMessage>(scenario: &Scenario, mut nodes: Vec<BoxedNode<M>>) -> Trace {
    assert_eq!(nodes.len(), scenario.n, "one node per id");
    let mut engine = Engine {
        scenario,
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        queue: BinaryHeap::new(),
        seq: 0,
        next_msg: 0,
        timers: HashMap::new(),
        generation: 0,
        samplers: (0..scenario.n).map(|_| None).collect(),
        events: Vec::new(),
    };
    for node in nodes.iter_mut() {
        let id = node.id();
        let mut fx = Effects::new();
        node.start(&mut fx);
        engine.apply(0, id, fx);
        engine.sample(0, id, node.storage(), true);
    }
    let mut now = 0;
    while let Some(item) = engine.queue.pop() {
        if item.t > scenario.horizon || engine.events.len() >= MAX_EVENTS {
            break;
        }
        now = item.t;
        let mut fx = Effects::new();
        let target = match item.what {
            Pending::Deliver { id, from, to, msg } => {
                engine.log(
                    now,
                    Event::Deliver {
                        node: to,
                        from,
                        id,
                        msg: msg.to_string(),
                    },
                );
                nodes[to.index()].on_message(from, msg, &mut fx);
                to
            }
            Pending::Timer {
                node,
                key,
                generation,
            } => {
                if engine.timers.get(&(node, key)) != Some(&generation) {
                    continue;
                }
                engine.timers.remove(&(node, key));
                engine.log(now, Event::TimerFire { node, key });
                nodes[node.index()].on_timer(key, &mut fx);
                node
            }
        };
        engine.apply(now, target, fx);
        engine.sample(now, target, nodes[target.index()].storage(), false);
    }
    for node in &nodes {
        engine.sample(now, node.id(), node.storage(), true);
    }
    Trace {
        meta: meta(scenario),
        events: engine.events,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Slot, View};

    fn decisions(trace: &Trace) -> Vec<(Ticks, NodeId, Value, View)> {
        trace
            .events
            .iter()
            .filter_map(|e| match e.event {
                Event::Decide { node, value, view } => Some((e.t, node, value, view)),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn synchronous_single_shot_decides_in_five_delays() {
        let s = Scenario::new(4, 1);
        let trace = run(&s);
        let d = decisions(&trace);
        assert_eq!(d.len(), 4);
        for (t, _, value, view) in d {
            assert_eq!((t, value, view), (5, Value(1), View(0)));
        }
    }

    #[test]
    fn same_seed_same_trace() {
        let s = Scenario {
            gst: 40,
            seed: 11,
            horizon: 400,
            delay_model: DelayModel::Uniform,
            ..Scenario::new(4, 1)
        };
        assert_eq!(run(&s).to_text(), run(&s).to_text());
        let other = Scenario {
            seed: 12,
            ..s.clone()
        };
        assert_ne!(run(&s).to_text(), run(&other).to_text());
    }

    #[test]
    fn silent_leader_forces_a_view_change() {
        let s = Scenario {
            byzantine: vec![0],
            delta_bound: 1,
            horizon: 200,
            ..Scenario::new(4, 1)
        };
        let d = decisions(&run(&s));
        assert_eq!(d.len(), 3);
        assert!(d.iter().all(|&(_, _, _, view)| view == View(1)));
    }

    #[test]
    fn synchronous_multi_shot_notarizes_one_slot_per_delay() {
        let s = Scenario {
            mode: Mode::Multi,
            slots: Some(4),
            horizon: 100,
            ..Scenario::new(4, 1)
        };
        let trace = run(&s);
        for k in 1..=4u64 {
            let t = trace.events.iter().find_map(|e| match e.event {
                Event::Notarize { slot, .. } if slot == Slot(k) => Some(e.t),
                _ => None,
            });
            assert_eq!(t, Some(k + 1), "slot {k}");
        }
        let fin = trace.events.iter().find_map(|e| match e.event {
            Event::Finalize { slot: Slot(1), .. } => Some(e.t),
            _ => None,
        });
        assert_eq!(fin, Some(5));
    }

    #[test]
    #[should_panic(expected = "tried to send as")]
    fn forged_sender_is_refused() {
        struct Forger;
        impl Protocol for Forger {
            type Msg = Message;
            fn id(&self) -> NodeId {
                NodeId(0)
            }
            fn start(&mut self, fx: &mut Effects<Message>) {
                fx.outbound.push(crate::protocol::Outbound {
                    dest: Dest::Broadcast,
                    msg: Message::ViewChange { view: View(1) },
                    claimed_sender: Some(NodeId(1)),
                });
            }
            fn on_message(&mut self, _: NodeId, _: Message, _: &mut Effects<Message>) {}
            fn on_timer(&mut self, _: TimerKey, _: &mut Effects<Message>) {}
            fn storage(&self) -> StorageSample {
                StorageSample::default()
            }
        }
        let s = Scenario::new(4, 1);
        let mut nodes = single_shot_nodes(&s, RuleVariant::Full);
        nodes[0] = Box::new(Forger);
        simulate(&s, nodes);
    }
}
