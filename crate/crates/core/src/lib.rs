//! TetraBFT: unauthenticated, responsive Byzantine consensus with constant
//! per-node storage, plus a pipelined multi-slot variant, a discrete-event
//! simulator and property checkers.

pub mod checker;
pub mod error;
pub mod message;
pub mod multishot;
pub mod node;
pub mod protocol;
pub mod rules;
pub mod sim;
pub mod types;

pub use error::{ParseError, RuleError, ScenarioError};
pub use message::{Block, Message, MessageKind, Proof, SlotMessage, Suggest, WireMessage};
pub use multishot::{MultiConfig, MultiNode};
pub use node::{Node, NodeConfig};
pub use protocol::{Dest, Effects, Note, Outbound, Protocol, StorageSample, TimerKey, TimerOp};
pub use types::{NodeId, Params, Phase, Slot, Ticks, Value, View, VoteHistory, VoteRecord};
