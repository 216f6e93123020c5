use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tetrabft::checker::explore::{explore, ExploreConfig};
use tetrabft::checker::{check, Property, Status};
use tetrabft::rules::RuleVariant;
use tetrabft::sim::{measure_latency, run_batch, run_with_variant, Scenario, Selector, Trace};

const SEED_VAR: &str = "TETRABFT_SEED";

#[derive(Parser)]
#[command(
    name = "tetrabft",
    version,
    about = "Simulate, check and explore TetraBFT runs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace_out: PathBuf,
        #[arg(long, value_enum, default_value_t = Rules::Full)]
        rules: Rules,
    },
    /// Simulate every `*.toml` scenario of a directory.
    Batch {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a trace; counterexamples are written next to it.
    Check {
        #[arg(long)]
        trace: PathBuf,
        /// Comma-separated property names (default: all).
        #[arg(long, value_delimiter = ',')]
        properties: Vec<Property>,
    },
    /// Exhaustively explore a tiny single-shot configuration.
    Explore {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        f: usize,
        #[arg(long, default_value_t = 2)]
        values: u8,
        /// Number of views, starting at view 0.
        #[arg(long, default_value_t = 2)]
        views: u64,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "equivocate,lying-history"
        )]
        adversary_menu: Vec<Menu>,
        #[arg(long, value_enum, default_value_t = Rules::Full)]
        rules: Rules,
    },
    /// Time between two landmark events, in message delays when the trace
    /// has a constant delay.
    Latency {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        from: Selector,
        #[arg(long)]
        to: Selector,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rules {
    Full,
    /// Mutant without the two-blocking-sets case of the node rule.
    NoTwoBlockingSets,
    /// Mutant without any blocking-set claim in the node rule.
    NoBlockingClaims,
}

impl From<Rules> for RuleVariant {
    fn from(r: Rules) -> Self {
        match r {
            Rules::Full => RuleVariant::Full,
            Rules::NoTwoBlockingSets => RuleVariant::WithoutTwoBlockingSets,
            Rules::NoBlockingClaims => RuleVariant::WithoutBlockingClaims,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Menu {
    Equivocate,
    LyingHistory,
}

/// A failure the user has to fix: exit code 2.
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

fn seed_override() -> Result<Option<u64>, UsageError> {
    match std::env::var(SEED_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| UsageError(format!("{SEED_VAR} must be an integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, UsageError> {
    let mut s = Scenario::load(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn load_trace(path: &Path) -> Result<Trace, UsageError> {
    let text =
        fs::read_to_string(path).map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
    Trace::parse(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())))
}

/// Run a command; `Ok(false)` means some check failed.
fn execute(command: Command) -> Result<bool, UsageError> {
    match command {
        Command::Run {
            scenario,
            trace_out,
            rules,
        } => {
            let s = load_scenario(&scenario, seed_override()?)?;
            let trace = run_with_variant(&s, rules.into());
            fs::write(&trace_out, trace.to_text())?;
            println!(
                "seed={} events={} trace={}",
                s.seed,
                trace.events.len(),
                trace_out.display()
            );
            Ok(true)
        }
        Command::Batch { dir, out } => {
            let rows = run_batch(&dir, &out, seed_override()?)?;
            let clean = rows.iter().filter(|r| r.violations.is_empty()).count();
            let decided = rows.iter().filter(|r| r.decided).count();
            println!(
                "scenarios={} decided={decided} clean={clean} summary={}",
                rows.len(),
                out.join("summary.csv").display()
            );
            Ok(clean == rows.len())
        }
        Command::Check { trace, properties } => {
            let t = load_trace(&trace)?;
            let properties = if properties.is_empty() {
                Property::ALL.to_vec()
            } else {
                properties
            };
            let mut ok = true;
            for p in properties {
                let v = check(&t, p);
                if v.status == Status::Fail {
                    ok = false;
                    let cx = counterexample_path(&trace, p);
                    fs::write(&cx, v.counterexample_trace(&t).to_text())?;
                    println!("FAIL {p} counterexample={}", cx.display());
                    eprintln!("{p}: {}", v.detail);
                } else {
                    println!("{v}");
                }
            }
            Ok(ok)
        }
        Command::Explore {
            n,
            f,
            values,
            views,
            adversary_menu,
            rules,
        } => {
            let cfg = ExploreConfig {
                values,
                variant: rules.into(),
                equivocate: adversary_menu.contains(&Menu::Equivocate),
                lying_history: adversary_menu.contains(&Menu::LyingHistory),
                ..ExploreConfig::new(n, f, views)
            };
            let report = explore(cfg).map_err(UsageError)?;
            match &report.violation {
                None => println!(
                    "PASS explore states={} transitions={}",
                    report.states, report.transitions
                ),
                Some(v) => {
                    println!(
                        "FAIL {} states={} transitions={}",
                        v.property, report.states, report.transitions
                    );
                    eprint!("{v}");
                }
            }
            Ok(report.violation.is_none())
        }
        Command::Latency { trace, from, to } => {
            let l = measure_latency(&load_trace(&trace)?, from, to).map_err(UsageError)?;
            match l.delays() {
                Some(k) => println!("{k}"),
                None => println!("{} ticks", l.ticks),
            }
            Ok(true)
        }
    }
}

fn counterexample_path(trace: &Path, p: Property) -> PathBuf {
    let name = trace
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    trace.with_file_name(format!("{name}.{p}.cx"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
