//! The contract between a node state machine and whatever drives it.

use crate::message::WireMessage;
use crate::types::{NodeId, Phase, Slot, Ticks, Value, View};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dest {
    To(NodeId),
    /// Every node, the sender included.
    Broadcast,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outbound<M> {
    pub dest: Dest,
    pub msg: M,
    /// Sender the message claims to come from. Honest nodes leave this empty;
    /// the simulator refuses to deliver anything whose claim differs from the
    /// node that produced it.
    pub claimed_sender: Option<NodeId>,
}

/// Timers are named by the protocol. Single-shot nodes use one key, multi-shot
/// nodes use the slot number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimerKey(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerOp {
    /// Arm (or re-arm) `key` to fire `after` ticks from now.
    Set {
        key: TimerKey,
        after: Ticks,
    },
    Cancel {
        key: TimerKey,
    },
}

/// Protocol-level events worth putting in the trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Note {
    Decide {
        value: Value,
        view: View,
    },
    Notarize {
        slot: Slot,
        view: View,
        value: Value,
    },
    Finalize {
        slot: Slot,
        view: View,
        value: Value,
    },
    /// A multi-shot vote was interpreted as `phase` for an earlier slot.
    Record {
        slot: Slot,
        phase: Phase,
        view: View,
        value: Value,
    },
    /// A message was discarded because it shows misbehaviour.
    Ignored {
        from: NodeId,
        reason: &'static str,
    },
    /// A Byzantine wrapper deviated from the honest behaviour.
    Adversary {
        action: &'static str,
        detail: String,
    },
}

/// Everything a node wants done in response to one input.
#[derive(Clone, Debug)]
pub struct Effects<M> {
    pub outbound: Vec<Outbound<M>>,
    pub timers: Vec<TimerOp>,
    pub notes: Vec<Note>,
}

impl<M> Default for Effects<M> {
    fn default() -> Self {
        Effects {
            outbound: Vec::new(),
            timers: Vec::new(),
            notes: Vec::new(),
        }
    }
}

impl<M> Effects<M> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn broadcast(&mut self, msg: M) {
        self.outbound.push(Outbound {
            dest: Dest::Broadcast,
            msg,
            claimed_sender: None,
        });
    }

    pub fn send(&mut self, to: NodeId, msg: M) {
        self.outbound.push(Outbound {
            dest: Dest::To(to),
            msg,
            claimed_sender: None,
        });
    }

    pub fn set_timer(&mut self, key: TimerKey, after: Ticks) {
        self.timers.push(TimerOp::Set { key, after });
    }

    pub fn cancel_timer(&mut self, key: TimerKey) {
        self.timers.push(TimerOp::Cancel { key });
    }

    pub fn note(&mut self, note: Note) {
        self.notes.push(note);
    }

    pub fn is_empty(&self) -> bool {
        self.outbound.is_empty() && self.timers.is_empty() && self.notes.is_empty()
    }

    pub fn decision(&self) -> Option<Value> {
        self.notes.iter().find_map(|n| match n {
            Note::Decide { value, .. } => Some(*value),
            _ => None,
        })
    }
}

/// State size as seen by the storage checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StorageSample {
    /// Bytes that would have to survive a restart.
    pub persistent_bytes: usize,
    /// Number of buffered messages, vote tallies and similar per-view entries.
    pub volatile_entries: usize,
    /// Multi-shot only: retained slots above the finalized height.
    pub active_slots: usize,
    /// Single-shot view, or multi-shot finalized height.
    pub progress: u64,
}

/// A deterministic, event-driven node.
pub trait Protocol: Send {
    type Msg: WireMessage;

    fn id(&self) -> NodeId;
    fn start(&mut self, fx: &mut Effects<Self::Msg>);
    fn on_message(&mut self, from: NodeId, msg: Self::Msg, fx: &mut Effects<Self::Msg>);
    fn on_timer(&mut self, key: TimerKey, fx: &mut Effects<Self::Msg>);
    fn storage(&self) -> StorageSample;
}
