//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! `TETRABFT_BLESS=1` rewrites the golden projections under `tests/golden/`.
//! `TETRABFT_ACCEPTANCE_FULL=1` adds the three-view exhaustive run of the
//! full rules (a few minutes on one core).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tetrabft::checker::explore::{explore, ExploreConfig};
use tetrabft::checker::{check, Property, Status};
use tetrabft::message::{Proof, Suggest};
use tetrabft::rules::oracle::{oracle_leader_rule, oracle_node_rule};
use tetrabft::rules::{leader_value_is_safe, node_check_safe, ProofSet, RuleVariant, SuggestSet};
use tetrabft::sim::{
    run, AdversaryConfig, DelayModel, Event, Filter, Mode, Scenario, Strategy, Trace,
};
use tetrabft::types::{NodeId, Params, Slot, Ticks, Value, View, VoteRecord};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn honest_sends<'a>(
    trace: &'a Trace,
    prefix: &'a str,
) -> impl Iterator<Item = (Ticks, NodeId, &'a str)> + 'a {
    trace.events.iter().filter_map(move |e| match &e.event {
        Event::Send { node, msg, .. } if trace.meta.is_honest(*node) && msg.starts_with(prefix) => {
            Some((e.t, *node, msg.as_str()))
        }
        _ => None,
    })
}

fn decisions(trace: &Trace) -> BTreeMap<NodeId, (Ticks, Value)> {
    let mut out = BTreeMap::new();
    for e in &trace.events {
        if let Event::Decide { node, value, .. } = e.event {
            if trace.meta.is_honest(node) {
                out.entry(node).or_insert((e.t, value));
            }
        }
    }
    out
}

fn single(n: usize, f: usize, delay: Ticks, delta_bound: Ticks) -> Scenario {
    Scenario {
        delay,
        delta_bound,
        horizon: 60 * delta_bound,
        ..Scenario::new(n, f)
    }
}

// 1. Every honest node decides the leader's value exactly 5δ after the proposal.
fn good_case() -> Outcome {
    let mut runs = 0;
    for (n, f) in [(4, 1), (7, 2)] {
        for delay in [1, 3] {
            for silent in [false, true] {
                let mut s = single(n, f, delay, delay);
                s.initial_values = (0..n as u64).map(|i| 10 + i).collect();
                if silent {
                    s.byzantine = vec![n as u32 - 1];
                }
                let trace = run(&s);
                let (t0, _, _) = honest_sends(&trace, "PROPOSAL(v=0")
                    .next()
                    .ok_or("no proposal")?;
                let decided = decisions(&trace);
                let leader_value = s.initial_value(NodeId(0));
                ensure(decided.len() == trace.meta.honest().count(), || {
                    format!("n={n} δ={delay}: {decided:?}")
                })?;
                for (node, (t, value)) in decided {
                    ensure(t - t0 == 5 * delay && value == leader_value, || {
                        format!("n={n} δ={delay} silent={silent}: node {node} decided {value} after {} ticks", t - t0)
                    })?;
                }
                runs += 1;
            }
        }
    }
    Ok(format!(
        "{runs} runs, every decision at proposal + 5δ with the leader's value"
    ))
}

// 2. Silent view-0 leader: last decision 7δ after the first VC, and each node
// decides within 9Δ of entering view 1.
fn view_change() -> Outcome {
    let mut runs = 0;
    for (n, f) in [(4, 1), (7, 2)] {
        for (delay, bound) in [(1, 2), (2, 3), (2, 2)] {
            let mut s = single(n, f, delay, bound);
            s.byzantine = vec![0];
            let trace = run(&s);
            let first_vc = honest_sends(&trace, "VC(v=1)")
                .map(|(t, _, _)| t)
                .min()
                .ok_or("no view change")?;
            let mut entry: HashMap<NodeId, Ticks> = HashMap::new();
            for (t, node, _) in honest_sends(&trace, "PROOF(v=1,") {
                entry.entry(node).or_insert(t);
            }
            let decided = decisions(&trace);
            ensure(decided.len() == trace.meta.honest().count(), || {
                format!("n={n}: only {} decided", decided.len())
            })?;
            let last = decided.values().map(|&(t, _)| t).max().unwrap();
            ensure(last - first_vc == 7 * delay, || {
                format!(
                    "n={n} δ={delay} Δ={bound}: last decision {} ticks after the first VC",
                    last - first_vc
                )
            })?;
            for (node, (t, _)) in &decided {
                let entered = *entry
                    .get(node)
                    .ok_or_else(|| format!("node {node} never entered view 1"))?;
                ensure(t - entered <= 9 * bound, || {
                    format!(
                        "node {node} decided {} ticks after entering view 1",
                        t - entered
                    )
                })?;
            }
            runs += 1;
        }
    }
    Ok(format!(
        "{runs} runs, last decision = first VC + 7δ, within 9Δ of view-1 entry"
    ))
}

fn adversarial(n: usize, f: usize, strategy: Strategy, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 32);
    let first = rng.gen_range(0..n as u32);
    let byzantine = (0..f as u32).map(|i| (first + i) % n as u32).collect();
    Scenario {
        seed,
        byzantine,
        initial_values: (0..n).map(|_| rng.gen_range(1..=3)).collect(),
        delta_bound: 3,
        delay: 3,
        delay_model: DelayModel::Uniform,
        gst: rng.gen_range(0..60),
        pre_gst_drop: 0.2,
        pre_gst_delay_max: Some(8),
        horizon: 400,
        adversary: Some(AdversaryConfig::new(strategy)),
        ..Scenario::new(n, f)
    }
}

// 3. Safety under every attacking strategy.
fn byzantine_safety() -> Outcome {
    let strategies = [
        Strategy::EquivocateVotes,
        Strategy::LyingLeader,
        Strategy::LyingHistory,
        Strategy::VcSpammer,
    ];
    let start = Instant::now();
    let cases: Vec<(usize, usize, Strategy, u64)> = [(4, 1), (7, 2)]
        .into_iter()
        .flat_map(|(n, f)| {
            strategies
                .into_iter()
                .flat_map(move |s| (0..1000).map(move |seed| (n, f, s, seed)))
        })
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(n, f, strategy, seed)| {
            let trace = run(&adversarial(n, f, strategy, seed));
            [Property::Agreement, Property::CrossView]
                .into_iter()
                .map(|p| check(&trace, p))
                .find(|v| v.status == Status::Fail)
                .map(|v| {
                    format!(
                        "n={n} {} seed={seed}: {} {}",
                        strategy.name(),
                        v.property,
                        v.detail
                    )
                })
        })
        .collect();
    let elapsed = start.elapsed();
    if let Some(first) = failures.first() {
        return Err(format!(
            "{} of {} runs failed, first: {first}",
            failures.len(),
            cases.len()
        ));
    }
    ensure(elapsed < Duration::from_secs(300), || {
        format!("took {elapsed:.0?}")
    })?;
    Ok(format!(
        "{} runs, agreement and cross-view hold, {elapsed:.1?}",
        cases.len()
    ))
}

fn random_record(rng: &mut ChaCha8Rng, below: u64) -> Option<VoteRecord> {
    rng.gen_bool(0.7)
        .then(|| VoteRecord::new(View(rng.gen_range(0..below)), Value(rng.gen_range(1..=3))))
}

/// (vote, prev, lock) with views below `v`; occasionally malformed.
fn random_row(rng: &mut ChaCha8Rng, v: u64) -> [Option<VoteRecord>; 3] {
    let vote = random_record(rng, v);
    let prev = match vote {
        Some(r) if r.view.0 > 0 && rng.gen_bool(0.5) => {
            let value = if rng.gen_bool(0.9) {
                Value(r.value.0 % 3 + 1)
            } else {
                r.value
            };
            Some(VoteRecord::new(View(rng.gen_range(0..r.view.0)), value))
        }
        None if rng.gen_bool(0.05) => random_record(rng, v),
        _ => None,
    };
    let lock = if rng.gen_bool(0.4) {
        random_record(rng, v)
    } else {
        None
    };
    [vote, prev, lock]
}

// 4. Efficient rules agree with literal enumeration.
fn rules_match_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut sets, mut checks, mut safe) = (0, 0, 0);
    for i in 0..12_000 {
        let n = if i % 2 == 0 { 4 } else { 5 };
        let params = Params::new(n, 1).unwrap();
        let v = View(rng.gen_range(1..=4));
        let senders = rng.gen_range(params.quorum()..=n);
        let rows: Vec<_> = (0..senders).map(|_| random_row(&mut rng, v.0)).collect();
        let proofs: ProofSet = rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                (
                    NodeId(j as u32),
                    Proof {
                        vote1: r[0],
                        prev_vote1: r[1],
                        vote4: r[2],
                    },
                )
            })
            .collect();
        let suggests: SuggestSet = rows
            .iter()
            .enumerate()
            .map(|(j, r)| {
                (
                    NodeId(j as u32),
                    Suggest {
                        vote2: r[0],
                        prev_vote2: r[1],
                        vote3: r[2],
                    },
                )
            })
            .collect();
        for val in (1..=4).map(Value) {
            let node = node_check_safe(&proofs, v, val, params);
            let leader = leader_value_is_safe(&suggests, v, val, params);
            ensure(node == oracle_node_rule(&proofs, v, val, params), || {
                format!("node rule differs: v={v} val={val} {proofs:?}")
            })?;
            ensure(
                leader == oracle_leader_rule(&suggests, v, val, params),
                || format!("leader rule differs: v={v} val={val} {suggests:?}"),
            )?;
            checks += 2;
            safe += node as usize + leader as usize;
        }
        sets += 1;
    }
    Ok(format!(
        "{sets} random sets, {checks} checks ({safe} safe), 0 discrepancies"
    ))
}

// 5. Exhaustive exploration of n = 4, f = 1.
fn exhaustive() -> Outcome {
    let full = explore(ExploreConfig::new(4, 1, 2))?;
    if let Some(v) = full.violation {
        return Err(format!("full rules, 2 views: {v}"));
    }
    let mut summary = format!("full rules, 2 views: {} states, 0 violations", full.states);
    if std::env::var_os("TETRABFT_ACCEPTANCE_FULL").is_some() {
        let r = explore(ExploreConfig::new(4, 1, 3))?;
        if let Some(v) = r.violation {
            return Err(format!("full rules, 3 views: {v}"));
        }
        summary += &format!("; 3 views: {} states, 0 violations", r.states);
    }
    let mutant = explore(ExploreConfig {
        variant: RuleVariant::WithoutBlockingClaims,
        lying_history: false,
        ..ExploreConfig::new(4, 1, 3)
    })?;
    match mutant.violation {
        Some(v) if v.property == "agreement" => Ok(format!(
            "{summary}; mutant without blocking claims breaks agreement in {} steps",
            v.steps.len()
        )),
        other => Err(format!(
            "{summary}; mutant without blocking claims not caught: {other:?}"
        )),
    }
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Landmark events of a trace: decisions, notarizations, finalizations, timer
/// expiries and one line per distinct send (broadcasts collapsed).
fn project(trace: &Trace) -> String {
    let mut seen = HashSet::new();
    let mut out = String::new();
    for line in trace.to_text().lines() {
        let mut words = line.split(' ');
        let (Some(t), Some(kind)) = (words.next(), words.next()) else {
            continue;
        };
        let kept = match kind {
            "DECIDE" | "NOTARIZE" | "FINALIZE" | "TIMER_FIRE" => line.to_string(),
            "SEND" => {
                let rest: Vec<&str> = words
                    .filter(|w| !w.starts_with("to=") && !w.starts_with("id="))
                    .collect();
                format!("{t} SEND {}", rest.join(" "))
            }
            _ if t.starts_with('#') => line.to_string(),
            _ => continue,
        };
        if seen.insert(kept.clone()) {
            out.push_str(&kept);
            out.push('\n');
        }
    }
    out
}

fn golden(name: &str) -> Result<Trace, String> {
    let dir = golden_dir();
    let scenario = Scenario::load(&dir.join(format!("{name}.toml"))).map_err(|e| e.to_string())?;
    let trace = run(&scenario);
    let projected = project(&trace);
    let path = dir.join(format!("{name}.golden"));
    if std::env::var_os("TETRABFT_BLESS").is_some() {
        std::fs::write(&path, &projected).map_err(|e| e.to_string())?;
    }
    let expected =
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected != projected {
        let line = expected
            .lines()
            .zip(projected.lines())
            .position(|(a, b)| a != b)
            .unwrap_or(0);
        return Err(format!(
            "{name}: projection differs from {} at line {}",
            path.display(),
            line + 1
        ));
    }
    Ok(trace)
}

fn landmarks(trace: &Trace, finalize: bool) -> HashMap<(NodeId, Slot), (Ticks, View)> {
    let mut out = HashMap::new();
    for e in &trace.events {
        match e.event {
            Event::Notarize {
                node, slot, view, ..
            } if !finalize => out.entry((node, slot)).or_insert((e.t, view)),
            Event::Finalize {
                node, slot, view, ..
            } if finalize => out.entry((node, slot)).or_insert((e.t, view)),
            _ => continue,
        };
    }
    out
}

// 6. Golden multi-shot traces: steady pipeline and a slot-1 view switch.
fn golden_traces() -> Outcome {
    let pipeline = golden("pipeline")?;
    let notarized = landmarks(&pipeline, false);
    let finalized = landmarks(&pipeline, true);
    ensure(!finalized.is_empty(), || {
        "pipeline: nothing finalized".into()
    })?;
    let delay = pipeline.meta.delay.max();
    for (&(node, slot), &(t, _)) in &notarized {
        let first = notarized[&(node, Slot(1))].0;
        ensure(t == first + (slot.0 - 1) * delay, || {
            format!("pipeline: node {node} notarized slot {slot} at {t}")
        })?;
    }
    for (&(node, slot), &(t, _)) in &finalized {
        let later = notarized.get(&(node, Slot(slot.0 + 3))).map(|&(t, _)| t);
        ensure(later == Some(t), || {
            format!(
                "pipeline: node {node} finalized slot {slot} at {t}, slot+3 notarized at {later:?}"
            )
        })?;
    }

    let switch_run = golden("view_switch")?;
    let text = project(&switch_run);
    for needle in [
        "SEND node=0 msg=VC(slot=1,v=1)",
        "msg=PROOF(slot=1,v=1,vote1=0:",
        "msg=SUGGEST(slot=1,v=1,vote2=0:",
    ] {
        ensure(text.contains(needle), || {
            format!("view switch: no `{needle}`")
        })?;
    }
    let verdict = check(&switch_run, Property::Consistency);
    ensure(verdict.status == Status::Pass, || {
        format!("view switch: consistency {verdict}")
    })?;
    let switch = honest_sends(&switch_run, "PROOF(slot=1,v=1,")
        .map(|(t, _, _)| t)
        .min()
        .ok_or("view switch: no switch")?;
    let renotarized = switch_run
        .events
        .iter()
        .filter(|e| matches!(e.event, Event::Notarize { slot: Slot(1), view, .. } if view.0 >= 1))
        .map(|e| e.t)
        .min()
        .ok_or("view switch: slot 1 never notarized after the switch")?;
    let bound = 5 * switch_run.meta.delta_bound;
    ensure(renotarized - switch <= bound, || {
        format!(
            "view switch: notarized {} ticks after the switch",
            renotarized - switch
        )
    })?;
    Ok(format!(
        "pipeline: {} notarizations, {} finalizations on schedule; view switch: notarized {} ticks after the switch (bound {bound})",
        notarized.len(),
        finalized.len(),
        renotarized - switch
    ))
}

fn max_window(trace: &Trace) -> usize {
    trace
        .events
        .iter()
        .filter_map(|e| match e.event {
            Event::Sample { node, slots, .. } if trace.meta.is_honest(node) => Some(slots),
            _ => None,
        })
        .max()
        .unwrap_or(0)
}

// 7. Long runs: constant persistent state, bounded slot window.
fn bounded_storage() -> Outcome {
    let churn = Scenario {
        gst: 1_100,
        pre_gst_drop: 0.0,
        schedule: Some(Filter {
            kinds: vec!["proposal".into()],
            ..Filter::default()
        }),
        horizon: 1_400,
        ..Scenario::new(4, 1)
    };
    let single = run(&churn);
    let views = honest_sends(&single, "VC(v=")
        .filter_map(|(_, _, m)| m["VC(v=".len()..m.len() - 1].parse::<u64>().ok())
        .max()
        .unwrap_or(0);
    ensure(views >= 50, || {
        format!("single-shot churn reached only view {views}")
    })?;
    ensure(!decisions(&single).is_empty(), || {
        "single-shot churn never decided".into()
    })?;

    let long = Scenario {
        mode: Mode::Multi,
        slots: Some(100),
        gst: 100,
        pre_gst_drop: 0.3,
        horizon: 1_500,
        seed: 7,
        ..Scenario::new(4, 1)
    };
    let multi = run(&long);
    let top = landmarks(&multi, true)
        .keys()
        .map(|&(_, s)| s.0)
        .max()
        .unwrap_or(0);
    ensure(top >= 100, || {
        format!("multi-shot finalized only up to slot {top}")
    })?;
    for (name, trace) in [("single", &single), ("multi", &multi)] {
        let v = check(trace, Property::Storage);
        ensure(v.status == Status::Pass, || format!("{name}: {v}"))?;
    }
    let window = max_window(&multi);
    ensure(window <= 5, || {
        format!("multi-shot window reached {window} slots")
    })?;
    Ok(format!("single-shot through view {views}, multi-shot to slot {top}; storage constant, window ≤ {window}"))
}

// 8. With identical honest inputs, that input is the decision. Nothing is
// dropped, so every node has to decide.
fn validity() -> Outcome {
    let cases: Vec<(usize, usize, u64)> = [(4, 1), (7, 2)]
        .into_iter()
        .flat_map(|(n, f)| (0..100).map(move |seed| (n, f, seed)))
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(n, f, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let input = rng.gen_range(1..=50);
            let s = Scenario {
                seed,
                initial_values: vec![input; n],
                gst: rng.gen_range(0..80),
                pre_gst_drop: 0.0,
                pre_gst_delay_max: Some(12),
                delay_model: DelayModel::Uniform,
                horizon: 600,
                ..Scenario::new(n, f)
            };
            let trace = run(&s);
            let v = check(&trace, Property::Validity);
            let decided = decisions(&trace).len();
            (v.status != Status::Pass || decided != n)
                .then(|| format!("n={n} seed={seed}: {v} ({decided} decided)"))
        })
        .collect();
    match failures.first() {
        Some(first) => Err(format!(
            "{} of {} runs failed, first: {first}",
            failures.len(),
            cases.len()
        )),
        None => Ok(format!(
            "{} runs, every node decided its common input",
            cases.len()
        )),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("good-case latency", good_case),
        ("view-change latency", view_change),
        ("byzantine safety", byzantine_safety),
        ("rules vs oracle", rules_match_oracle),
        ("exhaustive exploration", exhaustive),
        ("golden traces", golden_traces),
        ("bounded storage", bounded_storage),
        ("validity", validity),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (status, detail) = match criterion() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{status} {} {name}: {detail} [{:.1?}]",
            i + 1,
            start.elapsed()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
