use std::fs;

use tetrabft::sim::run_batch;

const GOOD: &str = "n = 4\nf = 1\ndelta_bound = 2\nhorizon = 200\n";
const SILENT_LEADER: &str = "n = 4\nf = 1\ndelta_bound = 2\nhorizon = 200\nbyzantine = [0]\n";

#[test]
fn batch_writes_traces_and_a_summary_in_name_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::write(dir.path().join("b_silent.toml"), SILENT_LEADER).unwrap();
    fs::write(dir.path().join("a_good.toml"), GOOD).unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let rows = run_batch(dir.path(), &out, None).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r.scenario.as_str()).collect();
    assert_eq!(names, ["a_good", "b_silent"]);
    assert!(rows.iter().all(|r| r.decided && r.violations.is_empty()));
    assert_eq!(rows[0].latency, Some(5));

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("scenario,decided,latency,violations"));
    assert_eq!(lines.next(), Some("a_good,true,5,"));
    assert!(out.join("a_good.trace").exists() && out.join("b_silent.trace").exists());
}

#[test]
fn invalid_scenario_aborts_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        "n = 4\nf = 2\ndelta_bound = 2\nhorizon = 10\n",
    )
    .unwrap();
    let err = run_batch(dir.path(), &dir.path().join("out"), None).unwrap_err();
    assert!(err.to_string().contains("bad.toml"), "{err}");
    assert!(!dir.path().join("out").exists());
}
