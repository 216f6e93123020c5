use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{ParseError, ScenarioError};
use crate::message::{MessageKind, WireMessage};
use crate::types::{NodeId, Params, Slot, Ticks, Value};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Single,
    Multi,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Single => "single",
            Mode::Multi => "multi",
        })
    }
}

impl FromStr for Mode {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Mode::Single),
            "multi" => Ok(Mode::Multi),
            _ => Err(ParseError::new(format!("unknown mode `{s}`"))),
        }
    }
}

/// Delay of a message sent after GST.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delay {
    Constant(Ticks),
    /// Uniform in `1..=max`.
    Uniform(Ticks),
}

impl Delay {
    pub fn max(self) -> Ticks {
        match self {
            Delay::Constant(d) | Delay::Uniform(d) => d,
        }
    }
}

impl fmt::Display for Delay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Delay::Constant(d) => write!(f, "constant:{d}"),
            Delay::Uniform(d) => write!(f, "uniform:{d}"),
        }
    }
}

impl FromStr for Delay {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, ticks) = s
            .split_once(':')
            .ok_or_else(|| ParseError::new(format!("bad delay `{s}`")))?;
        let ticks: Ticks = ticks
            .parse()
            .map_err(|_| ParseError::new(format!("bad delay `{s}`")))?;
        match kind {
            "constant" => Ok(Delay::Constant(ticks)),
            "uniform" => Ok(Delay::Uniform(ticks)),
            _ => Err(ParseError::new(format!("bad delay `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayModel {
    #[default]
    Constant,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Silent,
    CrashAfterK,
    EquivocateVotes,
    LyingLeader,
    LyingHistory,
    VcSpammer,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Silent,
        Strategy::CrashAfterK,
        Strategy::EquivocateVotes,
        Strategy::LyingLeader,
        Strategy::LyingHistory,
        Strategy::VcSpammer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Silent => "silent",
            Strategy::CrashAfterK => "crash_after_k",
            Strategy::EquivocateVotes => "equivocate_votes",
            Strategy::LyingLeader => "lying_leader",
            Strategy::LyingHistory => "lying_history",
            Strategy::VcSpammer => "vc_spammer",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub strategy: Strategy,
    /// `crash_after_k`: messages sent before going silent.
    #[serde(default = "default_k")]
    pub k: usize,
    /// `vc_spammer`: view changes sent per view entered.
    #[serde(default = "default_burst")]
    pub burst: u64,
    /// Values used when inventing proposals, votes and histories.
    #[serde(default)]
    pub values: Vec<u64>,
}

fn default_k() -> usize {
    10
}

fn default_burst() -> u64 {
    4
}

impl AdversaryConfig {
    pub fn new(strategy: Strategy) -> Self {
        AdversaryConfig {
            strategy,
            k: default_k(),
            burst: default_burst(),
            values: Vec::new(),
        }
    }
}

/// Pre-GST messages matching every non-empty list are dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Filter {
    #[serde(default)]
    pub kinds: Vec<String>,
    #[serde(default)]
    pub slots: Vec<u64>,
    #[serde(default)]
    pub views: Vec<u64>,
    #[serde(default)]
    pub from: Vec<u32>,
    #[serde(default)]
    pub to: Vec<u32>,
}

impl Filter {
    pub fn matches<M: WireMessage>(&self, from: NodeId, to: NodeId, msg: &M) -> bool {
        let kind_ok = self.kinds.is_empty()
            || self
                .kinds
                .iter()
                .any(|k| k.parse::<MessageKind>().is_ok_and(|k| k == msg.kind()));
        let slot_ok =
            self.slots.is_empty() || msg.slot().is_some_and(|s| self.slots.contains(&s.0));
        kind_ok
            && slot_ok
            && (self.views.is_empty() || self.views.contains(&msg.view().0))
            && (self.from.is_empty() || self.from.contains(&from.0))
            && (self.to.is_empty() || self.to.contains(&to.0))
    }
}

fn default_drop() -> f64 {
    0.5
}

fn default_delay() -> Ticks {
    1
}

/// Everything needed to reproduce one simulation run.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub mode: Mode,
    pub n: usize,
    pub f: usize,
    /// Δ: the post-GST delivery bound, in ticks.
    pub delta_bound: Ticks,
    /// δ for the constant model, the maximum for the uniform model.
    #[serde(default = "default_delay")]
    pub delay: Ticks,
    #[serde(default)]
    pub delay_model: DelayModel,
    #[serde(default)]
    pub gst: Ticks,
    pub horizon: Ticks,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub byzantine: Vec<u32>,
    /// One per node; defaults to 1 everywhere.
    #[serde(default)]
    pub initial_values: Vec<u64>,
    /// Multi-shot: the slot that must be finalized for the run to count as done.
    #[serde(default)]
    pub slots: Option<u64>,
    #[serde(default = "default_drop")]
    pub pre_gst_drop: f64,
    /// Pre-GST delays are uniform in `1..=pre_gst_delay_max` when set.
    #[serde(default)]
    pub pre_gst_delay_max: Option<Ticks>,
    #[serde(default)]
    pub schedule: Option<Filter>,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
}

impl Scenario {
    /// Synchronous all-honest single-shot run with δ = 1 and Δ = 2.
    pub fn new(n: usize, f: usize) -> Self {
        Scenario {
            mode: Mode::Single,
            n,
            f,
            delta_bound: 2,
            delay: 1,
            delay_model: DelayModel::Constant,
            gst: 0,
            horizon: 1_000,
            seed: 0,
            byzantine: Vec::new(),
            initial_values: Vec::new(),
            slots: None,
            pre_gst_drop: default_drop(),
            pre_gst_delay_max: None,
            schedule: None,
            adversary: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = toml::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let params = self.params()?;
        if self.byzantine.len() > params.f() {
            return Err(ScenarioError::ByzantineOverBound {
                count: self.byzantine.len(),
                f: params.f(),
            });
        }
        if let Some(&bad) = self.byzantine.iter().find(|&&b| b as usize >= self.n) {
            return Err(ScenarioError::UnknownNode(bad));
        }
        let mut sorted = self.byzantine.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.byzantine.len() {
            return Err(ScenarioError::Invalid("duplicate byzantine node".into()));
        }
        if !self.initial_values.is_empty() && self.initial_values.len() != self.n {
            return Err(ScenarioError::InitialValues {
                expected: self.n,
                got: self.initial_values.len(),
            });
        }
        if self.delta_bound == 0 {
            return Err(ScenarioError::Invalid(
                "delta_bound must be positive".into(),
            ));
        }
        if self.delay == 0 || self.delay > self.delta_bound {
            return Err(ScenarioError::DelayOutOfBound {
                delay: self.delay,
                bound: self.delta_bound,
            });
        }
        if !(0.0..=1.0).contains(&self.pre_gst_drop) {
            return Err(ScenarioError::Invalid(
                "pre_gst_drop must lie in [0, 1]".into(),
            ));
        }
        if self.pre_gst_delay_max == Some(0) {
            return Err(ScenarioError::Invalid(
                "pre_gst_delay_max must be positive".into(),
            ));
        }
        if let Some(filter) = &self.schedule {
            if let Some(bad) = filter
                .kinds
                .iter()
                .find(|k| k.parse::<MessageKind>().is_err())
            {
                return Err(ScenarioError::Invalid(format!(
                    "unknown message kind `{bad}` in schedule"
                )));
            }
            if let Some(&bad) = filter
                .from
                .iter()
                .chain(&filter.to)
                .find(|&&id| id as usize >= self.n)
            {
                return Err(ScenarioError::UnknownNode(bad));
            }
        }
        if self.mode == Mode::Multi && self.slots == Some(0) {
            return Err(ScenarioError::Invalid("slots must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<Params, ScenarioError> {
        Params::new(self.n, self.f).ok_or(ScenarioError::TooManyFaults {
            n: self.n,
            f: self.f,
        })
    }

    pub fn post_gst_delay(&self) -> Delay {
        match self.delay_model {
            DelayModel::Constant => Delay::Constant(self.delay),
            DelayModel::Uniform => Delay::Uniform(self.delay),
        }
    }

    pub fn is_byzantine(&self, id: NodeId) -> bool {
        self.byzantine.contains(&id.0)
    }

    pub fn initial_value(&self, id: NodeId) -> Value {
        Value(self.initial_values.get(id.index()).copied().unwrap_or(1))
    }

    pub fn last_slot(&self) -> Option<Slot> {
        (self.mode == Mode::Multi).then(|| Slot(self.slots.unwrap_or(8)))
    }

    pub fn adversary(&self) -> AdversaryConfig {
        self.adversary
            .clone()
            .unwrap_or_else(|| AdversaryConfig::new(Strategy::Silent))
    }
}
