//! Time between two landmark events of a trace.

use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::message::MessageKind;
use crate::types::Ticks;

use super::scenario::Delay;
use super::trace::{Event, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    Start,
    FirstProposal,
    FirstDecide,
    LastDecide,
    FirstHonestVc,
    FirstNotarize,
    FirstFinalize,
}

impl FromStr for Selector {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "start" => Selector::Start,
            "first-proposal" => Selector::FirstProposal,
            "first-decide" => Selector::FirstDecide,
            "last-decide" => Selector::LastDecide,
            "first-honest-vc" => Selector::FirstHonestVc,
            "first-notarize" => Selector::FirstNotarize,
            "first-finalize" => Selector::FirstFinalize,
            _ => return Err(ParseError::new(format!("unknown event selector `{s}`"))),
        })
    }
}

fn kind_of(msg: &str) -> Option<MessageKind> {
    let name = &msg[..msg.find('(')?];
    Some(match name {
        "PROPOSAL" => MessageKind::Proposal,
        "VC" => MessageKind::ViewChange,
        "SUGGEST" => MessageKind::Suggest,
        "PROOF" => MessageKind::Proof,
        _ if name.starts_with("VOTE") => MessageKind::Vote,
        _ => return None,
    })
}

impl Selector {
    /// Tick of the selected event, considering honest nodes only.
    pub fn locate(self, trace: &Trace) -> Option<Ticks> {
        let honest = |e: &Event| trace.meta.is_honest(e.node());
        let mut hits = trace
            .events
            .iter()
            .filter(|e| honest(&e.event))
            .filter(|e| match (&e.event, self) {
                (Event::Send { msg, .. }, Selector::FirstProposal) => {
                    kind_of(msg) == Some(MessageKind::Proposal)
                }
                (Event::Send { msg, .. }, Selector::FirstHonestVc) => {
                    kind_of(msg) == Some(MessageKind::ViewChange)
                }
                (Event::Decide { .. }, Selector::FirstDecide | Selector::LastDecide) => true,
                (Event::Notarize { .. }, Selector::FirstNotarize) => true,
                (Event::Finalize { .. }, Selector::FirstFinalize) => true,
                _ => false,
            });
        match self {
            Selector::Start => Some(0),
            Selector::LastDecide => hits.next_back().map(|e| e.t),
            _ => hits.next().map(|e| e.t),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Latency {
    pub ticks: Ticks,
    /// δ of a constant-delay trace, used to express the latency in delays.
    pub delta: Option<Ticks>,
}

impl Latency {
    /// Whole message delays, when the trace has a constant delay dividing the
    /// latency.
    pub fn delays(&self) -> Option<u64> {
        self.delta
            .filter(|&d| self.ticks.is_multiple_of(d))
            .map(|d| self.ticks / d)
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.delays() {
            Some(k) => write!(f, "{k} delays ({} ticks)", self.ticks),
            None => write!(f, "{} ticks", self.ticks),
        }
    }
}

pub fn measure_latency(trace: &Trace, from: Selector, to: Selector) -> Result<Latency, String> {
    let start = from
        .locate(trace)
        .ok_or_else(|| format!("no {from:?} event in trace"))?;
    let end = to
        .locate(trace)
        .ok_or_else(|| format!("no {to:?} event in trace"))?;
    let ticks = end
        .checked_sub(start)
        .ok_or_else(|| format!("{to:?} happens before {from:?}"))?;
    let delta = match trace.meta.delay {
        Delay::Constant(d) => Some(d),
        Delay::Uniform(_) => None,
    };
    Ok(Latency { ticks, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run, Scenario};

    #[test]
    fn good_case_is_five_delays_for_any_delta() {
        for delay in [1, 3, 7] {
            let s = Scenario {
                delay,
                delta_bound: delay,
                ..Scenario::new(4, 1)
            };
            let l =
                measure_latency(&run(&s), Selector::FirstProposal, Selector::FirstDecide).unwrap();
            assert_eq!(l.delays(), Some(5), "delay {delay}");
        }
    }

    #[test]
    fn missing_event_is_an_error() {
        let s = Scenario {
            horizon: 2,
            ..Scenario::new(4, 1)
        };
        assert!(measure_latency(&run(&s), Selector::Start, Selector::FirstDecide).is_err());
    }

    #[test]
    fn selectors_parse() {
        assert_eq!(
            "last-decide".parse::<Selector>().unwrap(),
            Selector::LastDecide
        );
        assert!("second-decide".parse::<Selector>().is_err());
    }
}
