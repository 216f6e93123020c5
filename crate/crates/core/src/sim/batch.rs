//! Run every scenario file of a directory and summarise the results.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::checker::{check_all, Status};
use crate::error::ScenarioError;

use super::latency::{measure_latency, Selector};
use super::scenario::{Mode, Scenario};
use super::{run, Trace};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BatchRow {
    pub scenario: String,
    /// Every honest node decided (single-shot) or finalized the last slot.
    pub decided: bool,
    /// Ticks from the first honest proposal to the first decision or
    /// finalization; empty when either is missing.
    pub latency: Option<u64>,
    /// Failed properties, `;`-separated.
    pub violations: String,
}

impl BatchRow {
    fn from_trace(scenario: String, trace: &Trace) -> Self {
        let verdicts = check_all(trace);
        let failed: Vec<&str> = verdicts
            .iter()
            .filter(|v| v.status == Status::Fail)
            .map(|v| v.property.name())
            .collect();
        let target = match trace.meta.mode {
            Mode::Single => Selector::FirstDecide,
            Mode::Multi => Selector::FirstFinalize,
        };
        BatchRow {
            scenario,
            decided: finished(trace),
            latency: measure_latency(trace, Selector::FirstProposal, target)
                .ok()
                .map(|l| l.ticks),
            violations: failed.join(";"),
        }
    }
}

fn finished(trace: &Trace) -> bool {
    use super::Event;
    let meta = &trace.meta;
    meta.honest().all(|id| {
        trace.events.iter().any(|e| match e.event {
            Event::Decide { node, .. } => node == id,
            Event::Finalize { node, slot, .. } => {
                node == id && meta.last_slot.is_some_and(|l| slot >= l)
            }
            _ => false,
        })
    })
}

/// Scenario files (`*.toml`) of `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    Ok(files)
}

/// Run every scenario in `dir` (in parallel), write `<name>.trace` files and
/// `summary.csv` into `out`. Rows come back in file-name order. Nothing runs
/// if any scenario file is invalid. `seed` replaces every scenario's seed.
pub fn run_batch(
    dir: &Path,
    out: &Path,
    seed: Option<u64>,
) -> Result<Vec<BatchRow>, ScenarioError> {
    let files = scenario_files(dir)?;
    let scenarios = files
        .iter()
        .map(|path| {
            let name = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            Scenario::load(path)
                .map(|s| {
                    (
                        name,
                        Scenario {
                            seed: seed.unwrap_or(s.seed),
                            ..s
                        },
                    )
                })
                .map_err(|e| ScenarioError::Invalid(format!("{}: {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out)?;
    let rows = scenarios
        .into_par_iter()
        .map(|(name, scenario)| {
            let trace = run(&scenario);
            fs::write(out.join(format!("{name}.trace")), trace.to_text())?;
            Ok(BatchRow::from_trace(name, &trace))
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    write_summary(&out.join(SUMMARY_FILE), &rows)?;
    Ok(rows)
}

fn write_summary(path: &Path, rows: &[BatchRow]) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
