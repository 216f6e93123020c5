//! Pipelined multi-shot TetraBFT.
//!
//! Every slot runs its own instance of the single-shot protocol, but a vote
//! for a block is also the next phase for the block's ancestors: a vote for
//! slot `s` is vote-1 for `s`, vote-2 for `s-1`, vote-3 for `s-2` and vote-4
//! for `s-3`. A block is notarized by a quorum of votes in one view and the
//! first of four consecutive notarized blocks is finalized with its prefix.

use std::collections::{BTreeMap, BTreeSet};

use crate::message::{Block, Proof, SlotMessage, Suggest};
use crate::protocol::{Effects, Note, Protocol, StorageSample, TimerKey};
use crate::rules::{self, ProofSet, RuleStats, RuleVariant, SuggestSet};
use crate::types::{NodeId, Params, Phase, Slot, Ticks, Value, View, VoteHistory};

/// Slots above the finalized height a node keeps state for.
pub const SLOT_WINDOW: u64 = 5;

/// Views ahead of a slot's current view for which messages are retained.
pub const VIEW_WINDOW: usize = 8;

/// Blocks remembered per slot (one per view in practice).
const BLOCKS_PER_SLOT: usize = 8;

/// Leaders rotate per slot in view 0. After a view change every re-run slot
/// shares the view's leader, so one faulty node cannot sit inside every
/// window of consecutive slots.
pub fn slot_leader(slot: Slot, view: View, n: usize) -> NodeId {
    let k = if view.0 == 0 { slot.0 } else { view.0 };
    NodeId((k % n as u64) as u32)
}

#[derive(Clone, Copy, Debug)]
pub struct MultiConfig {
    pub id: NodeId,
    pub params: Params,
    pub delta_bound: Ticks,
    pub variant: RuleVariant,
    /// Stop once this slot is finalized: leaders propose up to three slots
    /// past it (enough to finalize it) and timers stop requesting view changes.
    pub last_slot: Option<Slot>,
}

impl MultiConfig {
    pub fn new(id: NodeId, params: Params, delta_bound: Ticks) -> Self {
        MultiConfig {
            id,
            params,
            delta_bound,
            variant: RuleVariant::Full,
            last_slot: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct SlotState {
    view: View,
    /// Some leader proposed a block for this slot, in any view.
    ever_proposed: bool,
    /// The slot's timer has been started at least once.
    opened: bool,
    /// The slot's timer ran out and has not been restarted since.
    expired: bool,
    /// Leader's proposal in the current view, with its parent's view.
    proposal: Option<(Block, View)>,
    voted: bool,
    proposed: bool,
    votes: BTreeMap<NodeId, Value>,
    notarized: Option<Value>,
    suggests: SuggestSet,
    proofs: ProofSet,
    blocks: BTreeMap<Value, Block>,
    view_changes: BTreeMap<View, BTreeSet<NodeId>>,
    highest_vc_sent: View,
    future: BTreeMap<View, BTreeMap<(NodeId, u8), SlotMessage>>,
}

impl SlotState {
    fn reset_view(&mut self, view: View) {
        self.view = view;
        self.proposal = None;
        self.voted = false;
        self.proposed = false;
        self.votes.clear();
        self.notarized = None;
        self.suggests.clear();
        self.proofs.clear();
        self.view_changes = self.view_changes.split_off(&view.next());
    }

    fn remember(&mut self, block: Block) {
        if self.blocks.len() >= BLOCKS_PER_SLOT && !self.blocks.contains_key(&block.id()) {
            return;
        }
        self.blocks.insert(block.id(), block);
    }

    fn buffer(&mut self, from: NodeId, msg: SlotMessage) {
        let view = msg.view();
        if !self.future.contains_key(&view) && self.future.len() >= VIEW_WINDOW {
            match self.future.keys().next_back() {
                Some(&highest) if highest > view => {
                    self.future.remove(&highest);
                }
                _ => return,
            }
        }
        let kind = match msg {
            SlotMessage::Proposal { .. } => 0,
            SlotMessage::Vote { .. } => 1,
            SlotMessage::Suggest { .. } => 2,
            SlotMessage::Proof { .. } => 3,
            SlotMessage::ViewChange { .. } => 4,
        };
        self.future
            .entry(view)
            .or_default()
            .entry((from, kind))
            .or_insert(msg);
    }

    fn take_future(&mut self) -> Vec<(NodeId, SlotMessage)> {
        let keep = self.future.split_off(&self.view.next());
        let taken = std::mem::replace(&mut self.future, keep);
        let view = self.view;
        taken
            .into_iter()
            .filter(|(v, _)| *v == view)
            .flat_map(|(_, msgs)| msgs.into_iter().map(|((from, _), m)| (from, m)))
            .collect()
    }

    fn entries(&self) -> usize {
        self.votes.len()
            + self.suggests.len()
            + self.proofs.len()
            + self.blocks.len()
            + self.view_changes.values().map(BTreeSet::len).sum::<usize>()
            + self.future.values().map(BTreeMap::len).sum::<usize>()
    }
}

#[derive(Clone, Debug)]
pub struct MultiNode {
    cfg: MultiConfig,
    finalized: Slot,
    tip: Value,
    tip_view: View,
    /// Per-slot vote histories, indexed by `slot % SLOT_WINDOW`.
    histories: [VoteHistory; SLOT_WINDOW as usize],
    slots: BTreeMap<Slot, SlotState>,
    /// Highest slot whose timer should be running once it is in the window.
    opened_upto: Slot,
    stats: RuleStats,
}

impl MultiNode {
    pub fn new(cfg: MultiConfig) -> Self {
        MultiNode {
            cfg,
            finalized: Slot::GENESIS,
            tip: Block::GENESIS_ID,
            tip_view: View::ZERO,
            histories: Default::default(),
            slots: BTreeMap::new(),
            opened_upto: Slot::GENESIS,
            stats: RuleStats::default(),
        }
    }

    pub fn finalized(&self) -> Slot {
        self.finalized
    }

    pub fn tip(&self) -> Value {
        self.tip
    }

    pub fn slot_view(&self, slot: Slot) -> View {
        self.slots.get(&slot).map_or(View::ZERO, |s| s.view)
    }

    pub fn history(&self, slot: Slot) -> Option<&VoteHistory> {
        self.in_window(slot)
            .then(|| &self.histories[(slot.0 % SLOT_WINDOW) as usize])
    }

    fn n(&self) -> usize {
        self.cfg.params.n()
    }

    fn in_window(&self, slot: Slot) -> bool {
        slot > self.finalized && slot.0 <= self.finalized.0 + SLOT_WINDOW
    }

    fn history_mut(&mut self, slot: Slot) -> &mut VoteHistory {
        &mut self.histories[(slot.0 % SLOT_WINDOW) as usize]
    }

    fn state(&mut self, slot: Slot) -> &mut SlotState {
        debug_assert!(self.in_window(slot));
        self.slots.entry(slot).or_default()
    }

    fn timeout(&self) -> Ticks {
        crate::node::TIMEOUT_DELTAS * self.cfg.delta_bound
    }

    fn proposal_limit(&self) -> Option<Slot> {
        self.cfg.last_slot.map(|s| Slot(s.0 + 3))
    }

    fn done(&self) -> bool {
        matches!(self.cfg.last_slot, Some(last) if self.finalized >= last)
    }

    /// Block and view that a proposal for `slot` must extend: the block
    /// notarized for `slot - 1` in that slot's current view.
    fn notarized_parent(&self, slot: Slot) -> Option<(Value, View)> {
        let prev = slot.back(1)?;
        if prev == self.finalized {
            return Some((self.tip, self.tip_view));
        }
        let st = self.slots.get(&prev)?;
        st.notarized.map(|id| (id, st.view))
    }

    fn open_slots(&mut self, fx: &mut Effects<SlotMessage>) {
        let upto = self.opened_upto.0.min(self.finalized.0 + SLOT_WINDOW);
        let timeout = self.timeout();
        for s in self.finalized.0 + 1..=upto {
            let st = self.state(Slot(s));
            if !st.opened {
                st.opened = true;
                fx.set_timer(TimerKey(s), timeout);
            }
        }
    }

    fn open(&mut self, slot: Slot, fx: &mut Effects<SlotMessage>) {
        if slot > self.opened_upto {
            self.opened_upto = slot;
            self.open_slots(fx);
        }
    }

    fn payload(&self, slot: Slot, view: View) -> u64 {
        (view.0 << 40) | (slot.0 << 8) | self.cfg.id.0 as u64
    }

    /// Run every rule that might have become enabled, lowest slot first.
    fn progress(&mut self, fx: &mut Effects<SlotMessage>) {
        loop {
            let before = (self.finalized, fx.outbound.len());
            let slots: Vec<Slot> = (self.finalized.0 + 1..=self.finalized.0 + SLOT_WINDOW)
                .map(Slot)
                .collect();
            for &slot in &slots {
                self.try_vote(slot, fx);
                self.try_propose(slot, fx);
            }
            self.try_finalize(fx);
            if (self.finalized, fx.outbound.len()) == before {
                break;
            }
        }
    }

    fn proposal_is_safe(&mut self, slot: Slot) -> bool {
        let params = self.cfg.params;
        let variant = self.cfg.variant;
        let Some(st) = self.slots.get(&slot) else {
            return false;
        };
        let Some((block, _)) = st.proposal else {
            return false;
        };
        if st.view.is_zero() {
            return true;
        }
        rules::node_check_safe_with(
            &st.proofs,
            st.view,
            block.id(),
            params,
            variant,
            &mut self.stats,
        )
    }

    fn try_vote(&mut self, slot: Slot, fx: &mut Effects<SlotMessage>) {
        let Some(st) = self.slots.get(&slot) else {
            return;
        };
        let Some((block, parent_view)) = st.proposal else {
            return;
        };
        let view = st.view;
        if st.voted || self.notarized_parent(slot) != Some((block.parent, parent_view)) {
            return;
        }
        if !self.proposal_is_safe(slot) {
            return;
        }
        self.state(slot).voted = true;
        self.record_vote(block, view, fx);
        self.open(slot.next(), fx);
        if !self.try_propose(slot.next(), fx) {
            fx.broadcast(SlotMessage::Vote {
                slot,
                view,
                value: block.id(),
            });
        }
    }

    /// Record the phases a vote for `block` stands for.
    fn record_vote(&mut self, block: Block, view: View, fx: &mut Effects<SlotMessage>) {
        let slot = block.slot;
        self.history_mut(slot).record(Phase::One, view, block.id());
        fx.note(Note::Record {
            slot,
            phase: Phase::One,
            view,
            value: block.id(),
        });
        let mut ancestor = block.parent;
        let mut child = slot;
        for phase in [Phase::Two, Phase::Three, Phase::Four] {
            let Some(j) = child.back(1) else { break };
            if j <= self.finalized {
                break;
            }
            let Some(st) = self.slots.get(&j) else { break };
            if st.notarized != Some(ancestor) {
                break;
            }
            let (v, next) = (st.view, st.blocks.get(&ancestor).map(|b| b.parent));
            self.history_mut(j).record(phase, v, ancestor);
            fx.note(Note::Record {
                slot: j,
                phase,
                view: v,
                value: ancestor,
            });
            match next {
                Some(p) => ancestor = p,
                None => break,
            }
            child = j;
        }
    }

    /// Propose for `slot` if this node leads it and the previous slot's block
    /// has been voted for (or is the finalized tip). Returns whether a
    /// proposal was sent now.
    fn try_propose(&mut self, slot: Slot, fx: &mut Effects<SlotMessage>) -> bool {
        if !self.in_window(slot) || self.proposal_limit().is_some_and(|lim| slot > lim) {
            return false;
        }
        let view = self.slot_view(slot);
        if slot_leader(slot, view, self.n()) != self.cfg.id {
            return false;
        }
        if self.slots.get(&slot).is_some_and(|s| s.proposed) {
            return false;
        }
        let prev = slot.back(1).expect("slot 0 is never proposed");
        let parent = if prev == self.finalized {
            Some((self.tip, self.tip_view))
        } else {
            self.slots
                .get(&prev)
                .filter(|s| s.voted)
                .and_then(|s| s.proposal.map(|(b, _)| (b.id(), s.view)))
        };
        let Some((parent, parent_view)) = parent else {
            return false;
        };
        let fresh = Block::new(slot, self.payload(slot, view), parent);
        let block = if view.is_zero() {
            fresh
        } else {
            let params = self.cfg.params;
            let st = self.state(slot);
            let mut stats = RuleStats::default();
            let picked = rules::leader_pick_safe_value_counted(
                &st.suggests,
                view,
                fresh.id(),
                params,
                &mut stats,
            );
            self.stats.claim_evaluations += stats.claim_evaluations;
            match picked {
                None => return false,
                Some(id) if id == fresh.id() => fresh,
                Some(id) => match self.slots[&slot].blocks.get(&id) {
                    Some(known) if known.parent == parent => *known,
                    _ => return false,
                },
            }
        };
        // The parent was already voted for, so the implicit vote carried by
        // this proposal needs no extra bookkeeping.
        self.state(slot).proposed = true;
        fx.broadcast(SlotMessage::Proposal {
            view,
            block,
            parent_view,
        });
        true
    }

    fn try_finalize(&mut self, fx: &mut Effects<SlotMessage>) {
        // Highest j with j..j+3 notarized and linked by parent pointers.
        let mut target = None;
        for j in (self.finalized.0 + 1..=self.finalized.0 + SLOT_WINDOW).rev() {
            if self.linked_run(Slot(j)) {
                target = Some(Slot(j));
                break;
            }
        }
        let Some(target) = target else { return };
        // Walk back to the current tip.
        let mut chain = Vec::new();
        let mut id = self.slots[&target]
            .notarized
            .expect("checked by linked_run");
        let mut slot = target;
        while slot > self.finalized {
            let st = &self.slots[&slot];
            let Some(block) = st.blocks.get(&id) else {
                return;
            };
            chain.push((slot, st.view, id));
            id = block.parent;
            slot = Slot(slot.0 - 1);
        }
        if id != self.tip {
            fx.note(Note::Ignored {
                from: self.cfg.id,
                reason: "chain-does-not-extend-finalized-tip",
            });
            return;
        }
        for &(slot, view, value) in chain.iter().rev() {
            fx.note(Note::Finalize { slot, view, value });
            fx.cancel_timer(TimerKey(slot.0));
        }
        let (_, view, value) = chain[0];
        let old = self.finalized;
        self.finalized = target;
        self.tip = value;
        self.tip_view = view;
        self.slots = self.slots.split_off(&target.next());
        for s in old.0 + 1..=target.0 {
            // These ring entries now belong to slots s + SLOT_WINDOW.
            self.histories[(s % SLOT_WINDOW) as usize] = VoteHistory::new();
        }
        self.open_slots(fx);
        for s in target.0 + 1..=target.0 + SLOT_WINDOW {
            self.replay(Slot(s), fx);
        }
    }

    fn linked_run(&self, j: Slot) -> bool {
        let ids: Option<Vec<Value>> = (0..4)
            .map(|k| self.slots.get(&Slot(j.0 + k)).and_then(|s| s.notarized))
            .collect();
        let Some(ids) = ids else { return false };
        (1..4).all(|k| {
            self.slots[&Slot(j.0 + k)]
                .blocks
                .get(&ids[k as usize])
                .is_some_and(|b| b.parent == ids[k as usize - 1])
        })
    }

    fn replay(&mut self, slot: Slot, fx: &mut Effects<SlotMessage>) {
        if !self.slots.contains_key(&slot) {
            return;
        }
        for (from, msg) in self.state(slot).take_future() {
            self.handle(from, msg, fx);
        }
    }

    fn handle(&mut self, from: NodeId, msg: SlotMessage, fx: &mut Effects<SlotMessage>) {
        let slot = msg.slot();
        if let SlotMessage::Proposal {
            block, parent_view, ..
        } = msg
        {
            // Implicit vote for the parent, handled even if this slot is out of range.
            if let Some(prev) = slot.back(1) {
                if self.in_window(prev) {
                    self.on_vote(from, prev, parent_view, block.parent, fx);
                }
            }
        }
        if !self.in_window(slot) {
            return;
        }
        if let SlotMessage::ViewChange { view, .. } = msg {
            self.on_view_change(from, slot, view, fx);
            return;
        }
        let current = self.state(slot).view;
        let view = msg.view();
        if view > current {
            if let SlotMessage::Proposal { .. } = msg {
                self.state(slot).ever_proposed = true;
            }
            let is_proof = matches!(msg, SlotMessage::Proof { .. });
            self.state(slot).buffer(from, msg);
            if is_proof {
                self.catch_up(slot, view, fx);
            }
            return;
        }
        if view < current {
            return;
        }
        match msg {
            SlotMessage::Proposal {
                view,
                block,
                parent_view,
            } => self.on_proposal(from, view, block, parent_view, fx),
            SlotMessage::Vote { view, value, .. } => self.on_vote(from, slot, view, value, fx),
            SlotMessage::Suggest { suggest, .. } => self.on_suggest(from, slot, suggest, fx),
            SlotMessage::Proof { proof, .. } => self.on_proof(from, slot, proof),
            SlotMessage::ViewChange { .. } => unreachable!(),
        }
    }

    fn on_proposal(
        &mut self,
        from: NodeId,
        view: View,
        block: Block,
        parent_view: View,
        fx: &mut Effects<SlotMessage>,
    ) {
        let slot = block.slot;
        if from != slot_leader(slot, view, self.n()) {
            fx.note(Note::Ignored {
                from,
                reason: "proposal-from-non-leader",
            });
            return;
        }
        let st = self.state(slot);
        st.ever_proposed = true;
        match st.proposal {
            None => {
                st.proposal = Some((block, parent_view));
                st.remember(block);
            }
            Some((seen, _)) if seen != block => {
                fx.note(Note::Ignored {
                    from,
                    reason: "equivocating-proposal",
                });
            }
            Some(_) => {}
        }
    }

    fn on_vote(
        &mut self,
        from: NodeId,
        slot: Slot,
        view: View,
        value: Value,
        fx: &mut Effects<SlotMessage>,
    ) {
        let quorum = self.cfg.params.quorum();
        let st = self.state(slot);
        if view != st.view {
            if view > st.view {
                st.buffer(from, SlotMessage::Vote { slot, view, value });
            }
            return;
        }
        match st.votes.get(&from) {
            Some(first) if *first != value => {
                fx.note(Note::Ignored {
                    from,
                    reason: "equivocating-vote",
                });
                return;
            }
            Some(_) => return,
            None => {
                st.votes.insert(from, value);
            }
        }
        if st.notarized.is_none() && st.votes.values().filter(|v| **v == value).count() >= quorum {
            st.notarized = Some(value);
            fx.note(Note::Notarize { slot, view, value });
        }
    }

    fn on_suggest(
        &mut self,
        from: NodeId,
        slot: Slot,
        suggest: Suggest,
        fx: &mut Effects<SlotMessage>,
    ) {
        let view = self.state(slot).view;
        if slot_leader(slot, view, self.n()) != self.cfg.id {
            fx.note(Note::Ignored {
                from,
                reason: "misdirected-suggest",
            });
            return;
        }
        self.state(slot).suggests.entry(from).or_insert(suggest);
    }

    fn on_proof(&mut self, from: NodeId, slot: Slot, proof: Proof) {
        self.state(slot).proofs.entry(from).or_insert(proof);
    }

    fn on_view_change(
        &mut self,
        from: NodeId,
        slot: Slot,
        target: View,
        fx: &mut Effects<SlotMessage>,
    ) {
        let params = self.cfg.params;
        let st = self.state(slot);
        if target <= st.view {
            return;
        }
        if !st.view_changes.contains_key(&target) && st.view_changes.len() >= VIEW_WINDOW {
            match st.view_changes.keys().next_back() {
                Some(&highest) if highest > target => {
                    st.view_changes.remove(&highest);
                }
                _ => return,
            }
        }
        let senders = st.view_changes.entry(target).or_default();
        senders.insert(from);
        let count = senders.len();
        if params.is_blocking(count) && st.highest_vc_sent < target {
            st.highest_vc_sent = target;
            fx.broadcast(SlotMessage::ViewChange { slot, view: target });
        }
        if params.is_quorum(count) {
            self.switch(slot, target, fx);
        }
    }

    /// Move `slot` and every later slot that has seen a proposal or timed out
    /// to `view`.
    fn switch(&mut self, slot: Slot, view: View, fx: &mut Effects<SlotMessage>) {
        let last = self.finalized.0 + SLOT_WINDOW;
        for s in slot.0..=last {
            let s = Slot(s);
            let Some(st) = self.slots.get(&s) else {
                continue;
            };
            // A live slot nobody proposed for keeps its view, and its timer
            // keeps running so that it can raise a view change of its own.
            // Once that timer ran out the slot counts as aborted and moves.
            if (s != slot && !st.ever_proposed && !st.expired) || st.view >= view {
                continue;
            }
            self.switch_slot(s, view, fx);
        }
    }

    fn switch_slot(&mut self, s: Slot, view: View, fx: &mut Effects<SlotMessage>) {
        let timeout = self.timeout();
        let n = self.n();
        let proof = self.history_mut(s).proof();
        let suggest = self.history_mut(s).suggest();
        let st = self.state(s);
        st.ever_proposed = true;
        if st.opened {
            st.expired = false;
            fx.set_timer(TimerKey(s.0), timeout);
        }
        st.reset_view(view);
        fx.broadcast(SlotMessage::Proof {
            slot: s,
            view,
            proof,
        });
        fx.send(
            slot_leader(s, view, n),
            SlotMessage::Suggest {
                slot: s,
                view,
                suggest,
            },
        );
        self.replay(s, fx);
    }

    /// Proofs for a higher view from a blocking set mean some honest node
    /// moved the slot there; follow it. Covers nodes that missed the slot's
    /// first proposal and so did not move it along with earlier slots.
    fn catch_up(&mut self, slot: Slot, view: View, fx: &mut Effects<SlotMessage>) {
        let params = self.cfg.params;
        let st = self.state(slot);
        let proofs = st
            .future
            .get(&view)
            .map_or(0, |msgs| msgs.keys().filter(|(_, kind)| *kind == 3).count());
        if params.is_blocking(proofs) {
            self.switch_slot(slot, view, fx);
        }
    }
}

impl Protocol for MultiNode {
    type Msg = SlotMessage;

    fn id(&self) -> NodeId {
        self.cfg.id
    }

    fn start(&mut self, fx: &mut Effects<SlotMessage>) {
        self.open(Slot(1), fx);
        self.progress(fx);
    }

    fn on_message(&mut self, from: NodeId, msg: SlotMessage, fx: &mut Effects<SlotMessage>) {
        self.handle(from, msg, fx);
        self.progress(fx);
    }

    fn on_timer(&mut self, key: TimerKey, fx: &mut Effects<SlotMessage>) {
        let slot = Slot(key.0);
        if slot <= self.finalized || self.done() {
            return;
        }
        self.state(slot).expired = true;
        // One view change, for the lowest slot whose timer ran out.
        let Some((&lowest, st)) = self.slots.iter_mut().find(|(_, st)| st.expired) else {
            return;
        };
        let target = st.view.next();
        if st.highest_vc_sent < target {
            st.highest_vc_sent = target;
            fx.broadcast(SlotMessage::ViewChange {
                slot: lowest,
                view: target,
            });
        }
    }

    fn storage(&self) -> StorageSample {
        StorageSample {
            // histories + finalized height + tip id + tip view
            persistent_bytes: SLOT_WINDOW as usize * VoteHistory::ENCODED_LEN + 24,
            volatile_entries: self.slots.values().map(SlotState::entries).sum(),
            active_slots: self.slots.len(),
            progress: self.finalized.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{Dest, Outbound, TimerOp};

    const TIMEOUT: Ticks = 90;

    fn node(id: u32) -> MultiNode {
        MultiNode::new(MultiConfig::new(NodeId(id), Params::new(4, 1).unwrap(), 10))
    }

    fn deliver(node: &mut MultiNode, from: u32, msg: SlotMessage) -> Effects<SlotMessage> {
        let mut fx = Effects::new();
        node.on_message(NodeId(from), msg, &mut fx);
        fx
    }

    fn fire(node: &mut MultiNode, slot: u64) -> Effects<SlotMessage> {
        let mut fx = Effects::new();
        node.on_timer(TimerKey(slot), &mut fx);
        fx
    }

    /// The blocks honest view-0 leaders build for slots 1..=len.
    fn chain(len: u64) -> Vec<Block> {
        let mut parent = Block::GENESIS_ID;
        (1..=len)
            .map(|s| {
                let b = Block::new(Slot(s), (s << 8) | (s % 4), parent);
                parent = b.id();
                b
            })
            .collect()
    }

    fn proposal(block: Block) -> SlotMessage {
        SlotMessage::Proposal {
            view: View::ZERO,
            block,
            parent_view: View::ZERO,
        }
    }

    fn vote(block: Block) -> SlotMessage {
        SlotMessage::Vote {
            slot: block.slot,
            view: View::ZERO,
            value: block.id(),
        }
    }

    fn leader_of(block: Block) -> u32 {
        slot_leader(block.slot, View::ZERO, 4).0
    }

    fn sent(fx: &Effects<SlotMessage>) -> Vec<SlotMessage> {
        fx.outbound.iter().map(|o| o.msg).collect()
    }

    fn notarized(fx: &Effects<SlotMessage>) -> Vec<u64> {
        fx.notes
            .iter()
            .filter_map(|n| match n {
                Note::Notarize { slot, .. } => Some(slot.0),
                _ => None,
            })
            .collect()
    }

    fn finalized(fx: &Effects<SlotMessage>) -> Vec<u64> {
        fx.notes
            .iter()
            .filter_map(|n| match n {
                Note::Finalize { slot, .. } => Some(slot.0),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn leaders_rotate_per_slot_then_per_view() {
        let leaders: Vec<u32> = (1..=4)
            .map(|s| slot_leader(Slot(s), View(0), 4).0)
            .collect();
        assert_eq!(leaders, [1, 2, 3, 0]);
        let leaders: Vec<u32> = (1..=4)
            .map(|s| slot_leader(Slot(s), View(2), 4).0)
            .collect();
        assert_eq!(leaders, [2, 2, 2, 2]);
    }

    #[test]
    fn slot_one_leader_proposes_at_start() {
        let mut n = node(1);
        let mut fx = Effects::new();
        n.start(&mut fx);
        let b = chain(1)[0];
        assert_eq!(
            fx.outbound,
            vec![Outbound {
                dest: Dest::Broadcast,
                msg: proposal(b),
                claimed_sender: None
            }]
        );
        assert_eq!(
            fx.timers,
            vec![TimerOp::Set {
                key: TimerKey(1),
                after: TIMEOUT
            }]
        );
    }

    #[test]
    fn follower_votes_for_proposal_extending_tip() {
        let b = chain(1)[0];
        let mut n = node(3);
        let fx = deliver(&mut n, 1, proposal(b));
        assert_eq!(sent(&fx), vec![vote(b)]);
        assert_eq!(
            n.history(Slot(1))
                .unwrap()
                .highest(Phase::One)
                .map(|r| r.value),
            Some(b.id())
        );
    }

    #[test]
    fn next_leader_votes_by_proposing() {
        let c = chain(2);
        let mut n = node(2);
        let fx = deliver(&mut n, 1, proposal(c[0]));
        assert_eq!(sent(&fx), vec![proposal(c[1])]);
    }

    #[test]
    fn proposal_from_wrong_leader_is_ignored() {
        let b = chain(1)[0];
        let mut n = node(3);
        let fx = deliver(&mut n, 2, proposal(b));
        assert!(fx.outbound.is_empty());
        assert!(matches!(
            fx.notes[..],
            [Note::Ignored {
                reason: "proposal-from-non-leader",
                ..
            }]
        ));
    }

    #[test]
    fn vote_waits_for_notarized_parent() {
        let c = chain(2);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        // Leader 2's proposal is also its vote for slot 1: one vote so far.
        let fx = deliver(&mut n, 2, proposal(c[1]));
        assert!(fx.outbound.is_empty());
        assert!(deliver(&mut n, 0, vote(c[0])).outbound.is_empty());
        let fx = deliver(&mut n, 3, vote(c[0]));
        assert_eq!(notarized(&fx), [1]);
        assert_eq!(sent(&fx), vec![vote(c[1])]);
    }

    #[test]
    fn proposal_not_extending_notarized_parent_gets_no_vote() {
        let c = chain(1);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        for from in 0..3 {
            deliver(&mut n, from, vote(c[0]));
        }
        let stray = Block::new(Slot(2), 99, Value(12345));
        let fx = deliver(
            &mut n,
            2,
            SlotMessage::Proposal {
                view: View::ZERO,
                block: stray,
                parent_view: View::ZERO,
            },
        );
        assert!(fx.outbound.is_empty());
    }

    #[test]
    fn four_notarized_slots_finalize_the_first() {
        let c = chain(4);
        let mut n = node(0);
        let mut all = Vec::new();
        for (i, &b) in c.iter().enumerate() {
            deliver(&mut n, leader_of(b), proposal(b));
            for from in 1..=3 {
                let fx = deliver(&mut n, from, vote(b));
                if i < 3 {
                    assert!(
                        finalized(&fx).is_empty(),
                        "slot {} finalized too early",
                        i + 1
                    );
                }
                all.extend(finalized(&fx));
            }
        }
        assert_eq!(all, [1]);
        assert_eq!(n.finalized(), Slot(1));
        assert_eq!(n.tip(), c[0].id());
        // Vote-4 for slot 1 was recorded through the slot-4 vote before the
        // slot left the window.
        let history = n.history(Slot(2)).unwrap();
        assert_eq!(
            history.highest(Phase::Three).map(|r| r.value),
            Some(c[1].id())
        );
    }

    #[test]
    fn timeout_requests_view_change_for_lowest_expired_slot() {
        let c = chain(1);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        assert_eq!(
            sent(&fire(&mut n, 1)),
            vec![SlotMessage::ViewChange {
                slot: Slot(1),
                view: View(1)
            }]
        );
        // Slot 2 expiring too adds nothing: slot 1 already asked.
        assert!(fire(&mut n, 2).outbound.is_empty());
    }

    #[test]
    fn blocking_set_echoes_and_quorum_switches() {
        let c = chain(2);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        deliver(&mut n, 2, proposal(c[1]));
        let vc = SlotMessage::ViewChange {
            slot: Slot(1),
            view: View(1),
        };
        assert!(deliver(&mut n, 1, vc).outbound.is_empty());
        assert_eq!(sent(&deliver(&mut n, 2, vc)), vec![vc]);
        let fx = deliver(&mut n, 3, vc);
        // Both proposed slots move to view 1 and report to its leader.
        let kinds: Vec<(u64, &str, View, Dest)> = fx
            .outbound
            .iter()
            .map(|o| match o.msg {
                SlotMessage::Proof { slot, view, .. } => (slot.0, "proof", view, o.dest),
                SlotMessage::Suggest { slot, view, .. } => (slot.0, "suggest", view, o.dest),
                other => panic!("unexpected {other:?}"),
            })
            .collect();
        let to_leader = Dest::To(NodeId(1));
        assert_eq!(
            kinds,
            [
                (1, "proof", View(1), Dest::Broadcast),
                (1, "suggest", View(1), to_leader),
                (2, "proof", View(1), Dest::Broadcast),
                (2, "suggest", View(1), to_leader),
            ]
        );
        assert_eq!(n.slot_view(Slot(1)), View(1));
        assert_eq!(n.slot_view(Slot(2)), View(1));
        assert!(fx.timers.contains(&TimerOp::Set {
            key: TimerKey(1),
            after: TIMEOUT
        }));
    }

    #[test]
    fn unproposed_slot_keeps_view_zero() {
        let c = chain(2);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        deliver(&mut n, 2, proposal(c[1]));
        // Slot 3 is open (its timer runs) but nobody proposed for it.
        for from in 1..=3 {
            deliver(
                &mut n,
                from,
                SlotMessage::ViewChange {
                    slot: Slot(1),
                    view: View(1),
                },
            );
        }
        assert_eq!(n.slot_view(Slot(2)), View(1));
        assert_eq!(n.slot_view(Slot(3)), View(0));
        // Its own timer later asks for a view change just for it.
        assert_eq!(
            sent(&fire(&mut n, 3)),
            vec![SlotMessage::ViewChange {
                slot: Slot(3),
                view: View(1)
            }]
        );
    }

    #[test]
    fn expired_unproposed_slot_moves_with_the_rest() {
        let c = chain(1);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        fire(&mut n, 2);
        for from in 1..=3 {
            deliver(
                &mut n,
                from,
                SlotMessage::ViewChange {
                    slot: Slot(1),
                    view: View(1),
                },
            );
        }
        assert_eq!(n.slot_view(Slot(2)), View(1));
    }

    #[test]
    fn blocking_set_of_proofs_pulls_slot_forward() {
        let c = chain(1);
        let mut n = node(0);
        deliver(&mut n, 1, proposal(c[0]));
        let proof = |slot| SlotMessage::Proof {
            slot: Slot(slot),
            view: View(2),
            proof: Proof::default(),
        };
        assert!(deliver(&mut n, 1, proof(2)).outbound.is_empty());
        let fx = deliver(&mut n, 3, proof(2));
        assert_eq!(n.slot_view(Slot(2)), View(2));
        assert!(sent(&fx).contains(&proof(2)));
        assert_eq!(n.slot_view(Slot(1)), View(0));
    }

    #[test]
    fn storage_is_constant_in_finalized_height() {
        let c = chain(12);
        let mut n = node(0);
        let mut sizes = Vec::new();
        for &b in &c {
            deliver(&mut n, leader_of(b), proposal(b));
            for from in 1..=3 {
                deliver(&mut n, from, vote(b));
            }
            sizes.push(n.storage().persistent_bytes);
            assert!(n.storage().active_slots <= SLOT_WINDOW as usize);
        }
        assert_eq!(n.finalized(), Slot(9));
        assert!(sizes.windows(2).all(|w| w[0] == w[1]));
    }
}
