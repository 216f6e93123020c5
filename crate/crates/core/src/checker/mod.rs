//! Offline verdicts over traces, plus a bounded exhaustive explorer.
//!
//! Every property is a pure function of the trace. A failure comes with a
//! counterexample: a subsequence of the trace's events that still fails the
//! property on its own and passes (or stops making sense) if any single event
//! is removed.

pub mod explore;
mod properties;

use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::sim::Trace;

/// Volatile entries a node may hold per peer before the storage check fails.
pub const STORAGE_FACTOR: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Agreement,
    Validity,
    Termination,
    CrossView,
    WithinView,
    OneVote,
    QuorumCausality,
    PostGstDelivery,
    Authentication,
    Storage,
    Consistency,
    SlotReduction,
    Window,
}

impl Property {
    pub const ALL: [Property; 13] = [
        Property::Agreement,
        Property::Validity,
        Property::Termination,
        Property::CrossView,
        Property::WithinView,
        Property::OneVote,
        Property::QuorumCausality,
        Property::PostGstDelivery,
        Property::Authentication,
        Property::Storage,
        Property::Consistency,
        Property::SlotReduction,
        Property::Window,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Agreement => "agreement",
            Property::Validity => "validity",
            Property::Termination => "termination",
            Property::CrossView => "cross-view",
            Property::WithinView => "within-view",
            Property::OneVote => "one-vote",
            Property::QuorumCausality => "quorum-causality",
            Property::PostGstDelivery => "post-gst-delivery",
            Property::Authentication => "authentication",
            Property::Storage => "storage",
            Property::Consistency => "consistency",
            Property::SlotReduction => "slot-reduction",
            Property::Window => "window",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ParseError::new(format!("unknown property `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Nothing to check: the premise never held or the property does not
    /// apply to this kind of trace.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub property: Property,
    pub status: Status,
    pub detail: String,
    /// Indices into the checked trace's events.
    pub counterexample: Vec<usize>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }

    /// The counterexample as a standalone trace.
    pub fn counterexample_trace(&self, trace: &Trace) -> Trace {
        trace.subset(&self.counterexample)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Vacuous => "PASS",
        };
        write!(f, "{tag} {}", self.property)?;
        if self.status == Status::Vacuous {
            write!(f, " (vacuous: {})", self.detail)?;
        }
        Ok(())
    }
}

/// Result of one raw property scan.
pub(crate) enum Outcome {
    Pass,
    Vacuous(String),
    Fail { detail: String, witness: Vec<usize> },
}

fn scan(trace: &Trace, property: Property) -> Outcome {
    use properties::*;
    match property {
        Property::Agreement => agreement(trace),
        Property::Validity => validity(trace),
        Property::Termination => termination(trace),
        Property::CrossView => cross_view(trace),
        Property::WithinView => within_view(trace),
        Property::OneVote => one_vote(trace),
        Property::QuorumCausality => quorum_causality(trace),
        Property::PostGstDelivery => post_gst_delivery(trace),
        Property::Authentication => authentication(trace),
        Property::Storage => storage(trace),
        Property::Consistency => consistency(trace),
        Property::SlotReduction => slot_reduction(trace),
        Property::Window => window(trace),
    }
}

/// Greedily drop witness events while the property keeps failing.
fn minimize(trace: &Trace, property: Property, mut keep: Vec<usize>) -> Vec<usize> {
    keep.sort_unstable();
    keep.dedup();
    let mut i = 0;
    while i < keep.len() {
        let mut candidate = keep.clone();
        candidate.remove(i);
        if matches!(
            scan(&trace.subset(&candidate), property),
            Outcome::Fail { .. }
        ) {
            keep = candidate;
        } else {
            i += 1;
        }
    }
    keep
}

pub fn check(trace: &Trace, property: Property) -> Verdict {
    match scan(trace, property) {
        Outcome::Pass => Verdict {
            property,
            status: Status::Pass,
            detail: String::new(),
            counterexample: Vec::new(),
        },
        Outcome::Vacuous(detail) => Verdict {
            property,
            status: Status::Vacuous,
            detail,
            counterexample: Vec::new(),
        },
        Outcome::Fail { detail, witness } => {
            // Only minimize witnesses that reproduce on their own.
            let counterexample = if matches!(
                scan(&trace.subset(&witness), property),
                Outcome::Fail { .. }
            ) {
                minimize(trace, property, witness)
            } else {
                witness
            };
            Verdict {
                property,
                status: Status::Fail,
                detail,
                counterexample,
            }
        }
    }
}

pub fn check_all(trace: &Trace) -> Vec<Verdict> {
    Property::ALL.iter().map(|&p| check(trace, p)).collect()
}

pub fn check_agreement(trace: &Trace) -> Verdict {
    check(trace, Property::Agreement)
}

pub fn check_validity(trace: &Trace) -> Verdict {
    check(trace, Property::Validity)
}

pub fn check_termination(trace: &Trace) -> Verdict {
    check(trace, Property::Termination)
}

pub fn check_consistency(trace: &Trace) -> Verdict {
    check(trace, Property::Consistency)
}

pub fn check_storage_bound(trace: &Trace) -> Verdict {
    check(trace, Property::Storage)
}
