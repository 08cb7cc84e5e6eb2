use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use regret_manager::game::{guard_limit_from_env, parse_count};
use regret_manager::location::{ExampleId, Sharing};
use regret_manager::scenario::{load_scenario, LoadError, Scenario};
use regret_manager::sim::checks::{run_checks, standard_checks, Check, LookaheadGap, Verdict};
use regret_manager::sim::trace::{RoundRecord, TraceReader, TraceSummary, TraceWriter};
use regret_manager::sim::{drive, reproduce_example, Simulation};
use regret_manager::UtilityRegistry;
use regret_manager_session::{AppState, ServiceConfig, Session};

#[derive(Parser)]
#[command(name = "regret-manager", version, about = "Run and check the regret-constrained game manager")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write `trace.csv` and `summary.json`.
    Run {
        scenario: PathBuf,
        /// Rounds to play; accepts `1e6`.
        #[arg(long, value_parser = count)]
        horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Frame lengths for the lookahead comparison.
        #[arg(long = "T", value_delimiter = ',')]
        frames: Vec<usize>,
    },
    /// Play the six two-location examples without a manager and compare
    /// the averages with their closed-form values.
    ReproduceExamples {
        #[arg(long, value_parser = count, default_value = "1000000")]
        horizon: u64,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Check a trace (or a fresh run) against every applicable bound.
    VerifyBounds {
        #[arg(long)]
        scenario: PathBuf,
        /// A `trace.csv`, or the directory holding it. Without it the
        /// scenario is run afresh.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long = "T", value_delimiter = ',', default_value = "1")]
        frames: Vec<usize>,
        /// Rerun the scenario for each V and tabulate the lookahead gap.
        #[arg(long = "V-sweep", value_delimiter = ',')]
        v_sweep: Vec<f64>,
        #[arg(long, value_parser = count)]
        horizon: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve interactive sessions over HTTP and WebSocket.
    Serve {
        scenario: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// 1-based seat for the person; defaults to the scenario's.
        #[arg(long)]
        human: Option<usize>,
        /// Play the seat's scenario policy after this many idle seconds.
        #[arg(long)]
        auto_play_after: Option<u64>,
    },
}

fn count(s: &str) -> Result<u64, String> {
    parse_count(s).ok_or_else(|| format!("{s:?} is not a non-negative integer"))
}

/// Validation failures exit with 2, everything else with 1.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn validation(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            horizon,
            seed,
            out,
            frames,
        } => cmd_run(&scenario, horizon, seed, out, &frames),
        Command::ReproduceExamples { horizon, seed } => cmd_reproduce(horizon, seed),
        Command::VerifyBounds {
            scenario,
            trace,
            frames,
            v_sweep,
            horizon,
            seed,
        } => cmd_verify(&scenario, trace, &frames, &v_sweep, horizon, seed),
        Command::Serve {
            scenario,
            port,
            human,
            auto_play_after,
        } => cmd_serve(&scenario, port, human, auto_play_after),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, horizon: Option<u64>, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut s = load_scenario(path)?;
    if let Some(h) = horizon {
        s.horizon = h;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

/// Builds the simulation; anything wrong with the scenario is a validation
/// failure.
fn simulation(s: &Scenario) -> Result<Simulation, Failure> {
    let guard = guard_limit_from_env().map_err(validation)?;
    let resolved = s.resolve(&UtilityRegistry::with_builtins()).map_err(validation)?;
    Simulation::from_resolved(resolved, guard).map_err(validation)
}

fn print_verdicts(verdicts: &[Verdict]) {
    for v in verdicts {
        println!("  {v}");
    }
}

fn write_summary(path: &Path, summary: &TraceSummary) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(summary).map_err(runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn cmd_run(
    path: &Path,
    horizon: Option<u64>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    frames: &[usize],
) -> Result<ExitCode, Failure> {
    let scenario = load(path, horizon, seed)?;
    let sim = simulation(&scenario)?;
    let outputs = scenario.outputs.clone().unwrap_or_default();
    let dir = out
        .or_else(|| outputs.dir.map(PathBuf::from))
        .unwrap_or_else(|| {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            PathBuf::from("out").join(stem.unwrap_or_else(|| "run".into()))
        });
    fs::create_dir_all(&dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;

    let spec = sim.spec().clone();
    let mut writer = if outputs.summary_only {
        None
    } else {
        let file = File::create(dir.join("trace.csv")).map_err(runtime)?;
        Some(TraceWriter::new(BufWriter::new(file), spec.num_players(), spec.event_dim()).map_err(runtime)?)
    };
    let summary = drive(sim, frames, |r: &RoundRecord| match writer.as_mut() {
        Some(w) => w.write(r),
        None => Ok(()),
    })
    .map_err(runtime)?;
    if let Some(w) = writer {
        w.finish().map_err(runtime)?;
    }
    write_summary(&dir.join("summary.json"), &summary)?;

    println!("rounds: {}", summary.rounds);
    println!("ubar: {:?}", summary.final_ubar);
    println!("xbar: {:?}", summary.final_xbar);
    println!("ubar sum: {}", summary.final_ubar.iter().sum::<f64>());
    println!("output: {}", dir.display());
    print_verdicts(&summary.verdicts);
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(horizon: u64, seed: u64) -> Result<ExitCode, Failure> {
    let configs: Vec<(ExampleId, Sharing)> = ExampleId::ALL
        .into_iter()
        .flat_map(|id| [(id, Sharing::NoShare), (id, Sharing::Share)])
        .collect();
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .enumerate()
            .map(|(k, &(id, sharing))| {
                scope.spawn(move || reproduce_example(id, sharing, horizon, seed + k as u64))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("example run panicked"))
            .collect()
    });
    println!("{:<10} {:<9} {:>17} {:>17} result", "example", "sharing", "measured", "reference");
    let mut all = true;
    for r in results {
        let r = r.map_err(runtime)?;
        all &= r.passed;
        println!(
            "{:<10} {:<9} ({:.4}, {:.4}) ({:.4}, {:.4}) {}",
            r.id.as_str(),
            r.sharing.as_str(),
            r.measured[0],
            r.measured[1],
            r.reference[0],
            r.reference[1],
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(if all { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn trace_paths(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.join("trace.csv"), path.join("summary.json"))
    } else {
        let dir = path.parent().unwrap_or(Path::new("."));
        (path.to_path_buf(), dir.join("summary.json"))
    }
}

fn cmd_verify(
    path: &Path,
    trace: Option<PathBuf>,
    frames: &[usize],
    v_sweep: &[f64],
    horizon: Option<u64>,
    seed: Option<u64>,
) -> Result<ExitCode, Failure> {
    let scenario = load(path, horizon, seed)?;
    let sim = simulation(&scenario)?;
    let guard = sim.guard_limit();
    let mut passed = true;

    let verdicts = match &trace {
        Some(t) => {
            let (csv, summary_path) = trace_paths(t);
            match fs::read_to_string(&summary_path) {
                Ok(text) => {
                    let summary: TraceSummary = serde_json::from_str(&text)
                        .map_err(|e| validation(format!("{}: {e}", summary_path.display())))?;
                    let expected = scenario.fingerprint().map_err(validation)?;
                    if summary.fingerprint != expected {
                        return Err(validation(format!(
                            "trace was produced by a different scenario (fingerprint {} != {})",
                            summary.fingerprint, expected
                        )));
                    }
                }
                Err(_) => eprintln!(
                    "warning: no {} next to the trace; cannot confirm it matches the scenario",
                    summary_path.display()
                ),
            }
            let file = File::open(&csv).map_err(|e| runtime(format!("{}: {e}", csv.display())))?;
            let reader = TraceReader::new(BufReader::new(file)).map_err(runtime)?;
            let spec = sim.spec();
            if reader.num_players() != spec.num_players() || reader.event_dim() != spec.event_dim() {
                return Err(validation("trace dimensions do not match the scenario's game"));
            }
            let mut checks = standard_checks(sim.manager(), frames, guard).map_err(runtime)?;
            run_checks(reader, &mut checks).map_err(runtime)?
        }
        None => drive(sim, frames, |_| Ok(())).map_err(runtime)?.verdicts,
    };
    println!("checks:");
    print_verdicts(&verdicts);
    passed &= verdicts.iter().all(|v| v.passed);

    if !v_sweep.is_empty() {
        println!("V sweep (gap = achieved objective minus mean lookahead value at the last frame):");
        println!("{:>10} {:>3} {:>14} {:>14} {:>14} result", "V", "T", "last gap", "min gap", "allowance");
        for &v in v_sweep {
            let mut s = scenario.clone();
            s.manager = s.manager.with_v(v);
            let mut sim = simulation(&s)?;
            let mut gaps = Vec::new();
            for &t in frames {
                if let Some(g) = LookaheadGap::new(sim.manager(), t, guard).map_err(runtime)? {
                    gaps.push((t, g));
                }
            }
            for r in &mut sim {
                let r = r.map_err(runtime)?;
                for (_, g) in &mut gaps {
                    g.observe(&r).map_err(runtime)?;
                }
            }
            for (t, g) in &mut gaps {
                let verdict = g.finish().map_err(runtime)?;
                passed &= verdict.passed;
                let t = *t;
                let last_round = g.frames() * t as u64;
                let allowance = g.allowance(last_round.max(1));
                println!(
                    "{:>10} {:>3} {:>14.6} {:>14.6} {:>14} {}",
                    v,
                    t,
                    g.last_gap(),
                    g.min_gap(),
                    allowance.map_or("n/a".to_string(), |a| format!("{a:.6}")),
                    if verdict.passed { "PASS" } else { "FAIL" }
                );
            }
        }
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_serve(path: &Path, port: u16, human: Option<usize>, auto_play_after: Option<u64>) -> Result<ExitCode, Failure> {
    let mut scenario = load(path, None, None)?;
    if human.is_some() {
        scenario.human_player = human;
    }
    if scenario.human_player.is_none() {
        return Err(validation("serve needs a human seat: pass --human or set human_player"));
    }
    // fail fast on a scenario the sessions could not use
    Session::new(&scenario, None).map_err(validation)?;
    let config = ServiceConfig {
        default_human: scenario.human_player,
        default_scenario: Some(scenario),
        auto_play_after: auto_play_after.map(Duration::from_secs),
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .map_err(|e| runtime(format!("cannot bind port {port}: {e}")))?;
        println!("listening on {}", listener.local_addr().map_err(runtime)?);
        regret_manager_session::serve(listener, AppState::new(config))
            .await
            .map_err(runtime)
    })?;
    Ok(ExitCode::SUCCESS)
}
