//! Line-oriented execution traces.
//!
//! A trace starts with a version line and a parameter line, followed by one
//! event per line: `t=<tick> <EVENT> key=value ...`. Message bodies and
//! adversary details come last on their line and are taken verbatim.

use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::protocol::{Note, TimerKey};
use crate::types::{NodeId, Phase, Slot, Ticks, Value, View};

use super::scenario::{Delay, Mode};

pub const VERSION_LINE: &str = "# tetrabft-trace v1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceMeta {
    pub mode: Mode,
    pub n: usize,
    pub f: usize,
    pub delta_bound: Ticks,
    pub delay: Delay,
    pub gst: Ticks,
    pub horizon: Ticks,
    pub seed: u64,
    pub byzantine: Vec<NodeId>,
    pub inputs: Vec<Value>,
    pub last_slot: Option<Slot>,
}

impl TraceMeta {
    pub fn is_honest(&self, id: NodeId) -> bool {
        !self.byzantine.contains(&id)
    }

    pub fn honest(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n as u32)
            .map(NodeId)
            .filter(|&id| self.is_honest(id))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Send {
        node: NodeId,
        to: NodeId,
        id: u64,
        msg: String,
    },
    Deliver {
        node: NodeId,
        from: NodeId,
        id: u64,
        msg: String,
    },
    Drop {
        node: NodeId,
        to: NodeId,
        id: u64,
        reason: String,
    },
    TimerSet {
        node: NodeId,
        key: TimerKey,
        at: Ticks,
    },
    TimerFire {
        node: NodeId,
        key: TimerKey,
    },
    Decide {
        node: NodeId,
        value: Value,
        view: View,
    },
    Notarize {
        node: NodeId,
        slot: Slot,
        view: View,
        value: Value,
    },
    Finalize {
        node: NodeId,
        slot: Slot,
        view: View,
        value: Value,
    },
    Record {
        node: NodeId,
        slot: Slot,
        phase: Phase,
        view: View,
        value: Value,
    },
    Sample {
        node: NodeId,
        persistent: usize,
        volatile: usize,
        slots: usize,
        progress: u64,
    },
    Adversary {
        node: NodeId,
        action: String,
        detail: String,
    },
    Ignore {
        node: NodeId,
        from: NodeId,
        reason: String,
    },
}

impl Event {
    /// The node at which the event happened.
    pub fn node(&self) -> NodeId {
        match self {
            Event::Send { node, .. }
            | Event::Deliver { node, .. }
            | Event::Drop { node, .. }
            | Event::TimerSet { node, .. }
            | Event::TimerFire { node, .. }
            | Event::Decide { node, .. }
            | Event::Notarize { node, .. }
            | Event::Finalize { node, .. }
            | Event::Record { node, .. }
            | Event::Sample { node, .. }
            | Event::Adversary { node, .. }
            | Event::Ignore { node, .. } => *node,
        }
    }

    pub fn from_note(node: NodeId, note: Note) -> Event {
        match note {
            Note::Decide { value, view } => Event::Decide { node, value, view },
            Note::Notarize { slot, view, value } => Event::Notarize {
                node,
                slot,
                view,
                value,
            },
            Note::Finalize { slot, view, value } => Event::Finalize {
                node,
                slot,
                view,
                value,
            },
            Note::Record {
                slot,
                phase,
                view,
                value,
            } => Event::Record {
                node,
                slot,
                phase,
                view,
                value,
            },
            Note::Ignored { from, reason } => Event::Ignore {
                node,
                from,
                reason: reason.to_string(),
            },
            Note::Adversary { action, detail } => Event::Adversary {
                node,
                action: action.to_string(),
                detail,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub t: Ticks,
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Trace, ParseError> {
        text.parse()
    }

    /// Keep only the events at the given indices (in order); the metadata is
    /// unchanged.
    pub fn subset(&self, indices: &[usize]) -> Trace {
        Trace {
            meta: self.meta.clone(),
            events: indices.iter().map(|&i| self.events[i].clone()).collect(),
        }
    }

    pub fn send_of(&self, id: u64) -> Option<&TraceEvent> {
        self.events
            .iter()
            .find(|e| matches!(&e.event, Event::Send { id: i, .. } if *i == id))
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    if items.is_empty() {
        return "-".into();
    }
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for TraceMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "# mode={} n={} f={} delta={} delay={} gst={} horizon={} seed={} byzantine={} inputs={} slots={}",
            self.mode,
            self.n,
            self.f,
            self.delta_bound,
            self.delay,
            self.gst,
            self.horizon,
            self.seed,
            join(&self.byzantine),
            join(&self.inputs),
            self.last_slot.map_or("-".to_string(), |s| s.to_string()),
        )
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Send { node, to, id, msg } => write!(f, "SEND node={node} to={to} id={id} msg={msg}"),
            Event::Deliver { node, from, id, msg } => write!(f, "DELIVER node={node} from={from} id={id} msg={msg}"),
            Event::Drop { node, to, id, reason } => write!(f, "DROP node={node} to={to} id={id} reason={reason}"),
            Event::TimerSet { node, key, at } => write!(f, "TIMER_SET node={node} key={} at={at}", key.0),
            Event::TimerFire { node, key } => write!(f, "TIMER_FIRE node={node} key={}", key.0),
            Event::Decide { node, value, view } => write!(f, "DECIDE node={node} val={value} view={view}"),
            Event::Notarize { node, slot, view, value } => {
                write!(f, "NOTARIZE node={node} slot={slot} view={view} val={value}")
            }
            Event::Finalize { node, slot, view, value } => {
                write!(f, "FINALIZE node={node} slot={slot} view={view} val={value}")
            }
            Event::Record { node, slot, phase, view, value } => {
                write!(f, "RECORD node={node} slot={slot} phase={phase} view={view} val={value}")
            }
            Event::Sample { node, persistent, volatile, slots, progress } => write!(
                f,
                "SAMPLE node={node} persistent={persistent} volatile={volatile} slots={slots} progress={progress}"
            ),
            Event::Adversary { node, action, detail } => {
                write!(f, "ADVERSARY node={node} action={action} detail={detail}")
            }
            Event::Ignore { node, from, reason } => write!(f, "IGNORE node={node} from={from} reason={reason}"),
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} {}", self.t, self.event)
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{VERSION_LINE}")?;
        writeln!(f, "{}", self.meta)?;
        for e in &self.events {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// `key=value` fields of one line. The first occurrence of a key wins.
struct Fields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(text: &'a str) -> Result<Self, ParseError> {
        // Free-text tails (adversary details) may hold bare words; skip them.
        let pairs = text
            .split_whitespace()
            .filter_map(|tok| tok.split_once('='))
            .collect();
        Ok(Fields { pairs })
    }

    fn str(&self, key: &str) -> Result<&'a str, ParseError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| ParseError::new(format!("missing `{key}`")))
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T, ParseError> {
        let raw = self.str(key)?;
        raw.parse()
            .map_err(|_| ParseError::new(format!("bad `{key}` value `{raw}`")))
    }

    fn node(&self, key: &str) -> Result<NodeId, ParseError> {
        self.num(key).map(NodeId)
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ParseError> {
        let raw = self.str(key)?;
        if raw == "-" {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|x| {
                x.parse()
                    .map_err(|_| ParseError::new(format!("bad `{key}` entry `{x}`")))
            })
            .collect()
    }
}

impl FromStr for TraceMeta {
    type Err = ParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| ParseError::new("expected parameter line"))?;
        let fields = Fields::parse(body)?;
        let slots = fields.str("slots")?;
        Ok(TraceMeta {
            mode: fields.str("mode")?.parse()?,
            n: fields.num("n")?,
            f: fields.num("f")?,
            delta_bound: fields.num("delta")?,
            delay: fields.str("delay")?.parse()?,
            gst: fields.num("gst")?,
            horizon: fields.num("horizon")?,
            seed: fields.num("seed")?,
            byzantine: fields
                .list::<u32>("byzantine")?
                .into_iter()
                .map(NodeId)
                .collect(),
            inputs: fields
                .list::<u64>("inputs")?
                .into_iter()
                .map(Value)
                .collect(),
            last_slot: if slots == "-" {
                None
            } else {
                Some(Slot(
                    slots.parse().map_err(|_| ParseError::new("bad `slots`"))?,
                ))
            },
        })
    }
}

impl FromStr for TraceEvent {
    type Err = ParseError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let (t, rest) = line
            .split_once(' ')
            .ok_or_else(|| ParseError::new("truncated event"))?;
        let t: Ticks = t
            .strip_prefix("t=")
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ParseError::new(format!("bad time `{t}`")))?;
        let (name, rest) = rest.split_once(' ').unwrap_or((rest, ""));
        let fl = Fields::parse(rest)?;
        let event = match name {
            "SEND" => Event::Send {
                node: fl.node("node")?,
                to: fl.node("to")?,
                id: fl.num("id")?,
                msg: message(rest)?,
            },
            "DELIVER" => Event::Deliver {
                node: fl.node("node")?,
                from: fl.node("from")?,
                id: fl.num("id")?,
                msg: message(rest)?,
            },
            "DROP" => Event::Drop {
                node: fl.node("node")?,
                to: fl.node("to")?,
                id: fl.num("id")?,
                reason: fl.str("reason")?.to_string(),
            },
            "TIMER_SET" => Event::TimerSet {
                node: fl.node("node")?,
                key: TimerKey(fl.num("key")?),
                at: fl.num("at")?,
            },
            "TIMER_FIRE" => Event::TimerFire {
                node: fl.node("node")?,
                key: TimerKey(fl.num("key")?),
            },
            "DECIDE" => Event::Decide {
                node: fl.node("node")?,
                value: Value(fl.num("val")?),
                view: View(fl.num("view")?),
            },
            "NOTARIZE" => Event::Notarize {
                node: fl.node("node")?,
                slot: Slot(fl.num("slot")?),
                view: View(fl.num("view")?),
                value: Value(fl.num("val")?),
            },
            "FINALIZE" => Event::Finalize {
                node: fl.node("node")?,
                slot: Slot(fl.num("slot")?),
                view: View(fl.num("view")?),
                value: Value(fl.num("val")?),
            },
            "RECORD" => Event::Record {
                node: fl.node("node")?,
                slot: Slot(fl.num("slot")?),
                phase: Phase::from_number(fl.num("phase")?)
                    .ok_or_else(|| ParseError::new("bad phase"))?,
                view: View(fl.num("view")?),
                value: Value(fl.num("val")?),
            },
            "SAMPLE" => Event::Sample {
                node: fl.node("node")?,
                persistent: fl.num("persistent")?,
                volatile: fl.num("volatile")?,
                slots: fl.num("slots")?,
                progress: fl.num("progress")?,
            },
            "ADVERSARY" => Event::Adversary {
                node: fl.node("node")?,
                action: fl.str("action")?.to_string(),
                detail: tail(rest, "detail=")?.to_string(),
            },
            "IGNORE" => Event::Ignore {
                node: fl.node("node")?,
                from: fl.node("from")?,
                reason: fl.str("reason")?.to_string(),
            },
            other => return Err(ParseError::new(format!("unknown event `{other}`"))),
        };
        Ok(TraceEvent { t, event })
    }
}

fn tail<'a>(rest: &'a str, key: &str) -> Result<&'a str, ParseError> {
    rest.find(key)
        .map(|i| &rest[i + key.len()..])
        .ok_or_else(|| ParseError::new(format!("missing `{key}`")))
}

fn message(rest: &str) -> Result<String, ParseError> {
    tail(rest, "msg=").map(str::to_string)
}

impl FromStr for Trace {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, l)) if l.trim() == VERSION_LINE => {}
            _ => return Err(ParseError::new(format!("missing `{VERSION_LINE}` header")).at_line(1)),
        }
        let (i, meta_line) = lines
            .next()
            .ok_or_else(|| ParseError::new("missing parameter line").at_line(2))?;
        let meta = meta_line
            .parse::<TraceMeta>()
            .map_err(|e| e.at_line(i + 1))?;
        let mut events = Vec::new();
        for (i, line) in lines {
            if line.starts_with('#') {
                continue;
            }
            events.push(
                line.trim()
                    .parse::<TraceEvent>()
                    .map_err(|e| e.at_line(i + 1))?,
            );
        }
        Ok(Trace { meta, events })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TraceMeta {
        TraceMeta {
            mode: Mode::Single,
            n: 4,
            f: 1,
            delta_bound: 2,
            delay: Delay::Constant(1),
            gst: 0,
            horizon: 50,
            seed: 3,
            byzantine: vec![NodeId(3)],
            inputs: vec![Value(1); 4],
            last_slot: None,
        }
    }

    #[test]
    fn round_trips_every_event_kind() {
        let n0 = NodeId(0);
        let events = vec![
            Event::Send {
                node: n0,
                to: NodeId(1),
                id: 7,
                msg: "PROPOSAL(v=0,val=1)".into(),
            },
            Event::Deliver {
                node: NodeId(1),
                from: n0,
                id: 7,
                msg: "PROPOSAL(v=0,val=1)".into(),
            },
            Event::Drop {
                node: n0,
                to: NodeId(2),
                id: 8,
                reason: "pre-gst".into(),
            },
            Event::TimerSet {
                node: n0,
                key: TimerKey(0),
                at: 18,
            },
            Event::TimerFire {
                node: n0,
                key: TimerKey(0),
            },
            Event::Decide {
                node: n0,
                value: Value(1),
                view: View(0),
            },
            Event::Notarize {
                node: n0,
                slot: Slot(2),
                view: View(1),
                value: Value(99),
            },
            Event::Finalize {
                node: n0,
                slot: Slot(2),
                view: View(1),
                value: Value(99),
            },
            Event::Record {
                node: n0,
                slot: Slot(1),
                phase: Phase::Three,
                view: View(0),
                value: Value(5),
            },
            Event::Sample {
                node: n0,
                persistent: 127,
                volatile: 3,
                slots: 0,
                progress: 1,
            },
            Event::Adversary {
                node: NodeId(3),
                action: "equivocate".into(),
                detail: "to=1 val=2 (was 1)".into(),
            },
            Event::Ignore {
                node: n0,
                from: NodeId(3),
                reason: "malformed-proof".into(),
            },
        ];
        let trace = Trace {
            meta: meta(),
            events: events
                .into_iter()
                .enumerate()
                .map(|(t, event)| TraceEvent {
                    t: t as Ticks,
                    event,
                })
                .collect(),
        };
        let text = trace.to_text();
        assert!(
            text.starts_with("# tetrabft-trace v1\n# mode=single n=4 f=1 delta=2 delay=constant:1")
        );
        assert_eq!(Trace::parse(&text).unwrap(), trace);
    }

    #[test]
    fn reports_line_of_bad_event() {
        let text = format!(
            "{VERSION_LINE}\n{}\nt=0 DECIDE node=0 val=1 view=0\nt=1 EXPLODE node=0\n",
            meta()
        );
        let err = Trace::parse(&text).unwrap_err();
        assert!(err.to_string().starts_with("line 4"), "{err}");
    }

    #[test]
    fn rejects_missing_header() {
        assert!(Trace::parse("t=0 DECIDE node=0 val=1 view=0\n").is_err());
    }
}
