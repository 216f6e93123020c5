//! Wire messages and their canonical text encoding.
//!
//! Messages never carry their sender: the channel attaches it, which is how the
//! model gets authenticated links without signatures.

use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::types::{Phase, Slot, Value, View, VoteHistory, VoteRecord};

/// A node's vote-2 history, sent to the leader when entering a view.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Suggest {
    pub vote2: Option<VoteRecord>,
    pub prev_vote2: Option<VoteRecord>,
    pub vote3: Option<VoteRecord>,
}

/// A node's vote-1 history, broadcast when entering a view.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Proof {
    pub vote1: Option<VoteRecord>,
    pub prev_vote1: Option<VoteRecord>,
    pub vote4: Option<VoteRecord>,
}

impl VoteHistory {
    pub fn suggest(&self) -> Suggest {
        Suggest {
            vote2: self.highest(Phase::Two),
            prev_vote2: self.prev(Phase::Two),
            vote3: self.highest(Phase::Three),
        }
    }

    pub fn proof(&self) -> Proof {
        Proof {
            vote1: self.highest(Phase::One),
            prev_vote1: self.prev(Phase::One),
            vote4: self.highest(Phase::Four),
        }
    }
}

/// Coarse classification used by drop filters and trace queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Proposal,
    Vote,
    Suggest,
    Proof,
    ViewChange,
}

impl FromStr for MessageKind {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposal" => Ok(MessageKind::Proposal),
            "vote" => Ok(MessageKind::Vote),
            "suggest" => Ok(MessageKind::Suggest),
            "proof" => Ok(MessageKind::Proof),
            "view-change" | "vc" => Ok(MessageKind::ViewChange),
            other => Err(ParseError::new(format!("unknown message kind `{other}`"))),
        }
    }
}

/// Single-shot messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Message {
    Proposal {
        view: View,
        value: Value,
    },
    Vote {
        phase: Phase,
        view: View,
        value: Value,
    },
    Suggest {
        view: View,
        suggest: Suggest,
    },
    Proof {
        view: View,
        proof: Proof,
    },
    ViewChange {
        view: View,
    },
}

impl Message {
    pub fn view(&self) -> View {
        match *self {
            Message::Proposal { view, .. }
            | Message::Vote { view, .. }
            | Message::Suggest { view, .. }
            | Message::Proof { view, .. }
            | Message::ViewChange { view } => view,
        }
    }
}

/// A multi-shot block. Its identity is a digest over slot, payload and parent,
/// so a vote for a block also pins the block's whole chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub slot: Slot,
    pub payload: u64,
    pub parent: Value,
}

impl Block {
    pub const GENESIS_ID: Value = Value(0);

    pub fn new(slot: Slot, payload: u64, parent: Value) -> Self {
        Block {
            slot,
            payload,
            parent,
        }
    }

    pub fn id(&self) -> Value {
        let mut h = mix(0x7465_7472_6162_6674 ^ self.slot.0);
        h = mix(h ^ self.payload);
        h = mix(h ^ self.parent.0);
        // Keep 0 reserved for genesis.
        Value(h.max(1))
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multi-shot messages: every message is scoped to a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotMessage {
    /// A block proposal. It doubles as the leader's vote for `parent` at
    /// `parent_view` in the previous slot.
    Proposal {
        view: View,
        block: Block,
        parent_view: View,
    },
    Vote {
        slot: Slot,
        view: View,
        value: Value,
    },
    Suggest {
        slot: Slot,
        view: View,
        suggest: Suggest,
    },
    Proof {
        slot: Slot,
        view: View,
        proof: Proof,
    },
    ViewChange {
        slot: Slot,
        view: View,
    },
}

impl SlotMessage {
    pub fn slot(&self) -> Slot {
        match *self {
            SlotMessage::Proposal { block, .. } => block.slot,
            SlotMessage::Vote { slot, .. }
            | SlotMessage::Suggest { slot, .. }
            | SlotMessage::Proof { slot, .. }
            | SlotMessage::ViewChange { slot, .. } => slot,
        }
    }

    pub fn view(&self) -> View {
        match *self {
            SlotMessage::Proposal { view, .. }
            | SlotMessage::Vote { view, .. }
            | SlotMessage::Suggest { view, .. }
            | SlotMessage::Proof { view, .. }
            | SlotMessage::ViewChange { view, .. } => view,
        }
    }
}

/// What the simulator and checker need to know about a message type.
pub trait WireMessage:
    Clone + fmt::Debug + fmt::Display + FromStr<Err = ParseError> + PartialEq + Send + Sync + 'static
{
    fn kind(&self) -> MessageKind;
    fn slot(&self) -> Option<Slot>;
    fn view(&self) -> View;
}

impl WireMessage for Message {
    fn kind(&self) -> MessageKind {
        match self {
            Message::Proposal { .. } => MessageKind::Proposal,
            Message::Vote { .. } => MessageKind::Vote,
            Message::Suggest { .. } => MessageKind::Suggest,
            Message::Proof { .. } => MessageKind::Proof,
            Message::ViewChange { .. } => MessageKind::ViewChange,
        }
    }

    fn slot(&self) -> Option<Slot> {
        None
    }

    fn view(&self) -> View {
        Message::view(self)
    }
}

impl WireMessage for SlotMessage {
    fn kind(&self) -> MessageKind {
        match self {
            SlotMessage::Proposal { .. } => MessageKind::Proposal,
            SlotMessage::Vote { .. } => MessageKind::Vote,
            SlotMessage::Suggest { .. } => MessageKind::Suggest,
            SlotMessage::Proof { .. } => MessageKind::Proof,
            SlotMessage::ViewChange { .. } => MessageKind::ViewChange,
        }
    }

    fn slot(&self) -> Option<Slot> {
        Some(SlotMessage::slot(self))
    }

    fn view(&self) -> View {
        SlotMessage::view(self)
    }
}

struct Rec(Option<VoteRecord>);

impl fmt::Display for Rec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{r}"),
            None => f.write_str("-"),
        }
    }
}

impl fmt::Display for Suggest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vote2={},prev2={},vote3={}",
            Rec(self.vote2),
            Rec(self.prev_vote2),
            Rec(self.vote3)
        )
    }
}

impl fmt::Display for Proof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vote1={},prev1={},vote4={}",
            Rec(self.vote1),
            Rec(self.prev_vote1),
            Rec(self.vote4)
        )
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Proposal { view, value } => write!(f, "PROPOSAL(v={view},val={value})"),
            Message::Vote { phase, view, value } => write!(f, "VOTE{phase}(v={view},val={value})"),
            Message::Suggest { view, suggest } => write!(f, "SUGGEST(v={view},{suggest})"),
            Message::Proof { view, proof } => write!(f, "PROOF(v={view},{proof})"),
            Message::ViewChange { view } => write!(f, "VC(v={view})"),
        }
    }
}

impl fmt::Display for SlotMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotMessage::Proposal {
                view,
                block,
                parent_view,
            } => write!(
                f,
                "PROPOSAL(slot={},v={view},val={},payload={},parent={},pv={parent_view})",
                block.slot,
                block.id(),
                block.payload,
                block.parent
            ),
            SlotMessage::Vote { slot, view, value } => {
                write!(f, "VOTE(slot={slot},v={view},val={value})")
            }
            SlotMessage::Suggest {
                slot,
                view,
                suggest,
            } => {
                write!(f, "SUGGEST(slot={slot},v={view},{suggest})")
            }
            SlotMessage::Proof { slot, view, proof } => {
                write!(f, "PROOF(slot={slot},v={view},{proof})")
            }
            SlotMessage::ViewChange { slot, view } => write!(f, "VC(slot={slot},v={view})"),
        }
    }
}

/// `NAME(k=v,...)` split into the name and its fields in order.
struct Call<'a> {
    name: &'a str,
    fields: Vec<(&'a str, &'a str)>,
}

impl<'a> Call<'a> {
    fn parse(s: &'a str) -> Result<Self, ParseError> {
        let open = s
            .find('(')
            .ok_or_else(|| ParseError::new(format!("missing `(` in `{s}`")))?;
        let body = s[open + 1..]
            .strip_suffix(')')
            .ok_or_else(|| ParseError::new(format!("missing `)` in `{s}`")))?;
        let fields = body
            .split(',')
            .filter(|kv| !kv.is_empty())
            .map(|kv| {
                kv.split_once('=')
                    .ok_or_else(|| ParseError::new(format!("field `{kv}` is not key=value")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Call {
            name: &s[..open],
            fields,
        })
    }

    fn get(&self, key: &str) -> Result<&'a str, ParseError> {
        self.fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| ParseError::new(format!("{} is missing `{key}`", self.name)))
    }

    fn has(&self, key: &str) -> bool {
        self.fields.iter().any(|(k, _)| *k == key)
    }

    fn num(&self, key: &str) -> Result<u64, ParseError> {
        let raw = self.get(key)?;
        raw.parse()
            .map_err(|_| ParseError::new(format!("`{key}={raw}` is not an integer")))
    }

    fn record(&self, key: &str) -> Result<Option<VoteRecord>, ParseError> {
        parse_record(self.get(key)?)
    }

    fn suggest(&self) -> Result<Suggest, ParseError> {
        Ok(Suggest {
            vote2: self.record("vote2")?,
            prev_vote2: self.record("prev2")?,
            vote3: self.record("vote3")?,
        })
    }

    fn proof(&self) -> Result<Proof, ParseError> {
        Ok(Proof {
            vote1: self.record("vote1")?,
            prev_vote1: self.record("prev1")?,
            vote4: self.record("vote4")?,
        })
    }
}

fn parse_record(s: &str) -> Result<Option<VoteRecord>, ParseError> {
    if s == "-" {
        return Ok(None);
    }
    let (v, val) = s
        .split_once(':')
        .ok_or_else(|| ParseError::new(format!("vote record `{s}` is not view:value")))?;
    let bad = || ParseError::new(format!("vote record `{s}` is not numeric"));
    Ok(Some(VoteRecord {
        view: View(v.parse().map_err(|_| bad())?),
        value: Value(val.parse().map_err(|_| bad())?),
    }))
}

impl FromStr for Message {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        if call.has("slot") {
            return Err(ParseError::new(format!("`{s}` is a multi-shot message")));
        }
        let view = View(call.num("v")?);
        let msg = match call.name {
            "PROPOSAL" => Message::Proposal {
                view,
                value: Value(call.num("val")?),
            },
            "SUGGEST" => Message::Suggest {
                view,
                suggest: call.suggest()?,
            },
            "PROOF" => Message::Proof {
                view,
                proof: call.proof()?,
            },
            "VC" => Message::ViewChange { view },
            name => {
                let phase = name
                    .strip_prefix("VOTE")
                    .and_then(|p| p.parse().ok())
                    .and_then(Phase::from_number)
                    .ok_or_else(|| ParseError::new(format!("unknown message `{name}`")))?;
                Message::Vote {
                    phase,
                    view,
                    value: Value(call.num("val")?),
                }
            }
        };
        Ok(msg)
    }
}

impl FromStr for SlotMessage {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let call = Call::parse(s)?;
        let slot = Slot(call.num("slot")?);
        let view = View(call.num("v")?);
        let msg = match call.name {
            "PROPOSAL" => {
                let block = Block::new(slot, call.num("payload")?, Value(call.num("parent")?));
                let claimed = Value(call.num("val")?);
                if block.id() != claimed {
                    return Err(ParseError::new(format!("block digest mismatch in `{s}`")));
                }
                SlotMessage::Proposal {
                    view,
                    block,
                    parent_view: View(call.num("pv")?),
                }
            }
            "VOTE" => SlotMessage::Vote {
                slot,
                view,
                value: Value(call.num("val")?),
            },
            "SUGGEST" => SlotMessage::Suggest {
                slot,
                view,
                suggest: call.suggest()?,
            },
            "PROOF" => SlotMessage::Proof {
                slot,
                view,
                proof: call.proof()?,
            },
            "VC" => SlotMessage::ViewChange { slot, view },
            name => return Err(ParseError::new(format!("unknown message `{name}`"))),
        };
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_single_shot_encoding() {
        let rec = |v, x| Some(VoteRecord::new(View(v), Value(x)));
        let cases = [
            (
                Message::Proposal {
                    view: View(0),
                    value: Value(7),
                },
                "PROPOSAL(v=0,val=7)",
            ),
            (
                Message::Vote {
                    phase: Phase::Three,
                    view: View(2),
                    value: Value(1),
                },
                "VOTE3(v=2,val=1)",
            ),
            (
                Message::Suggest {
                    view: View(3),
                    suggest: Suggest {
                        vote2: rec(2, 1),
                        prev_vote2: rec(1, 4),
                        vote3: None,
                    },
                },
                "SUGGEST(v=3,vote2=2:1,prev2=1:4,vote3=-)",
            ),
            (
                Message::Proof {
                    view: View(1),
                    proof: Proof {
                        vote1: rec(0, 5),
                        ..Proof::default()
                    },
                },
                "PROOF(v=1,vote1=0:5,prev1=-,vote4=-)",
            ),
            (Message::ViewChange { view: View(4) }, "VC(v=4)"),
        ];
        for (msg, text) in cases {
            assert_eq!(msg.to_string(), text);
            assert_eq!(text.parse::<Message>().unwrap(), msg);
        }
    }

    #[test]
    fn multi_shot_encoding_carries_slot() {
        let msg = SlotMessage::ViewChange {
            slot: Slot(1),
            view: View(1),
        };
        assert_eq!(msg.to_string(), "VC(slot=1,v=1)");
        assert!("VC(slot=1,v=1)".parse::<Message>().is_err());
        assert_eq!("VC(slot=1,v=1)".parse::<SlotMessage>().unwrap(), msg);
    }

    #[test]
    fn tampered_block_digest_is_rejected() {
        let block = Block::new(Slot(2), 9, Value(77));
        let good = SlotMessage::Proposal {
            view: View(0),
            block,
            parent_view: View(0),
        }
        .to_string();
        assert!(good.parse::<SlotMessage>().is_ok());
        let bad = good.replace("payload=9", "payload=10");
        assert!(bad.parse::<SlotMessage>().is_err());
    }

    #[test]
    fn history_builds_suggest_and_proof() {
        let h = VoteHistory::new()
            .with_vote(Phase::One, View(1), Value(1))
            .with_vote(Phase::Two, View(1), Value(1));
        let proof = h.proof();
        assert_eq!(proof.vote1, Some(VoteRecord::new(View(1), Value(1))));
        assert_eq!((proof.prev_vote1, proof.vote4), (None, None));
        let suggest = h.suggest();
        assert_eq!(suggest.vote2, Some(VoteRecord::new(View(1), Value(1))));
        assert_eq!((suggest.prev_vote2, suggest.vote3), (None, None));
    }

    fn record() -> impl Strategy<Value = Option<VoteRecord>> {
        prop::option::of(
            (0u64..50, any::<u64>()).prop_map(|(v, x)| VoteRecord::new(View(v), Value(x))),
        )
    }

    fn slot_message() -> impl Strategy<Value = SlotMessage> {
        let ids = (1u64..20, 0u64..9, any::<u64>(), any::<u64>());
        prop_oneof![
            (ids.clone(), 0u64..9).prop_map(|((s, v, p, parent), pv)| SlotMessage::Proposal {
                view: View(v),
                block: Block::new(Slot(s), p, Value(parent)),
                parent_view: View(pv),
            }),
            ids.clone().prop_map(|(s, v, x, _)| SlotMessage::Vote {
                slot: Slot(s),
                view: View(v),
                value: Value(x)
            }),
            (ids.clone(), record(), record(), record()).prop_map(|((s, v, _, _), a, b, c)| {
                SlotMessage::Suggest {
                    slot: Slot(s),
                    view: View(v),
                    suggest: Suggest {
                        vote2: a,
                        prev_vote2: b,
                        vote3: c,
                    },
                }
            }),
            (ids.clone(), record(), record(), record()).prop_map(|((s, v, _, _), a, b, c)| {
                SlotMessage::Proof {
                    slot: Slot(s),
                    view: View(v),
                    proof: Proof {
                        vote1: a,
                        prev_vote1: b,
                        vote4: c,
                    },
                }
            }),
            ids.prop_map(|(s, v, _, _)| SlotMessage::ViewChange {
                slot: Slot(s),
                view: View(v)
            }),
        ]
    }

    proptest! {
        #[test]
        fn slot_messages_reparse(msg in slot_message()) {
            prop_assert_eq!(msg.to_string().parse::<SlotMessage>().unwrap(), msg);
        }
    }
}
