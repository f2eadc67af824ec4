//! Command-line harness around the `nslp` solver.
//!
//! Subcommands: `quest` (acquisition phase only), `target` (tracking phase,
//! acquisition run silently first), `solve` (both phases) and
//! `oracle-check` (solve, then compare the tracked objective against the
//! exact small-dimension optimum per step).
//!
//! Traces go to a flat CSV with the header
//! `phase,k,t,dist_est,dist_exact,objective,g0_0,...,g0_{n-1}`;
//! `dist_exact` is empty where the exact oracle does not support the
//! geometry. All randomness (only the choice of the start point) flows from
//! `--seed`; runs with equal flags are byte-identical for any worker count.
//!
//! Exit codes: 0 success, 1 unusable input, 2 failed run (budget
//! exhaustion, lost tracking, numerical breakdown or an out-of-band oracle
//! gap), 3 oracle-unsupported dimension, 4 infeasible or unbounded programs
//! during an oracle check.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use nslp::oracle;
use nslp::quest::{quest_run, DistanceEstimator, QuestConfig, QuestResult};
use nslp::scenario::Scenario;
use nslp::targeting::{default_cohort_size, targeting_run, TargetingParams, TargetingState};
use nslp::{Point, Tolerances};

const EXIT_BAD_INPUT: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_UNSUPPORTED_DIM: u8 = 3;
const EXIT_DEGENERATE: u8 = 4;

/// Update epochs the acquisition phase may spend before giving up.
const MAX_UPDATES: usize = 500;
/// Tracking steps treated as warm-up after a start or a recovery.
const WARMUP_STEPS: usize = 25;

#[derive(Parser)]
#[command(
    name = "nslp",
    version,
    about = "Two-phase solver for non-stationary linear programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the acquisition phase and trace its update epochs (budget:
    /// 500 updates).
    Quest(RunArgs),
    /// Run the tracking phase (the acquisition runs first, untraced).
    Target(RunArgs),
    /// Run both phases and trace them with a phase column.
    Solve(RunArgs),
    /// Solve, then compare the tracked objective against the exact optimum
    /// of every step's instance (n ≤ 3 only). Prints a report to stdout.
    OracleCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV trace.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Fejer-map evaluations per data update; defaults to the scenario
    /// file's "L" or 10.
    #[arg(long = "L")]
    update_interval: Option<usize>,
    /// Relaxation factor of the Fejer map, in (0, 2).
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    /// Distance threshold ending the acquisition phase.
    #[arg(long, default_value_t = 1e-4)]
    epsilon: f64,
    /// Cross points per cohort (even, ≥ 2); defaults to 4·⌈n/2⌉ capped at 8.
    #[arg(long = "K")]
    cohort_size: Option<usize>,
    /// Cross spacing; defaults to epsilon.
    #[arg(long = "s")]
    spacing: Option<f64>,
    /// Tracking steps to run.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Feasibility slack for membership checks.
    #[arg(long = "feas-tol", default_value_t = 1e-9)]
    feas_tol: f64,
    /// Seed for the start point (the only randomness).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the cross membership sweep.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

struct Resolved {
    scenario: Scenario,
    quest_cfg: QuestConfig,
    targeting: TargetingParams,
    start: Point,
    out: PathBuf,
}

fn resolve(args: &RunArgs) -> Result<Resolved, String> {
    let text = std::fs::read_to_string(&args.scenario)
        .map_err(|e| format!("cannot read {}: {e}", args.scenario.display()))?;
    let scenario = Scenario::from_json_str(&text).map_err(|e| e.to_string())?;
    let update_interval = args
        .update_interval
        .or_else(|| scenario.update_interval_hint())
        .unwrap_or(10);
    let quest_cfg = QuestConfig::new(update_interval, args.lambda, args.epsilon)
        .map_err(|e| e.to_string())?
        .with_max_updates(MAX_UPDATES);
    // Validates positivity and conv_tol <= epsilon for the whole bundle.
    Tolerances::new(args.feas_tol, 1e-10, args.epsilon).map_err(|e| e.to_string())?;
    let targeting = TargetingParams {
        cohort_size: args
            .cohort_size
            .unwrap_or_else(|| default_cohort_size(scenario.dim())),
        spacing: args.spacing.unwrap_or(args.epsilon),
        steps: args.steps,
        feas_tol: args.feas_tol,
        workers: args.workers,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let start = Point::new(
        (0..scenario.dim())
            .map(|_| rng.random_range(0.0..2.0))
            .collect(),
    );
    Ok(Resolved {
        scenario,
        quest_cfg,
        targeting,
        start,
        out: args.out.clone(),
    })
}

/// Shortest-roundtrip decimal formatting; empty cells stay empty.
fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct TraceWriter {
    rows: String,
    dim: usize,
}

impl TraceWriter {
    fn new(dim: usize) -> TraceWriter {
        let mut header = String::from("phase,k,t,dist_est,dist_exact,objective");
        for j in 0..dim {
            let _ = write!(header, ",g0_{j}");
        }
        header.push('\n');
        TraceWriter { rows: header, dim }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        phase: &str,
        k: usize,
        t: f64,
        dist_est: Option<f64>,
        dist_exact: Option<f64>,
        objective: Option<f64>,
        point: &Point,
    ) {
        assert_eq!(point.dim(), self.dim);
        let _ = write!(
            self.rows,
            "{phase},{k},{t},{},{},{}",
            cell(dist_est),
            cell(dist_exact),
            cell(objective)
        );
        for j in 0..self.dim {
            let _ = write!(self.rows, ",{}", point[j]);
        }
        self.rows.push('\n');
    }

    fn write_to(&self, path: &PathBuf) -> Result<(), String> {
        std::fs::write(path, self.rows.as_bytes())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

fn quest_rows(w: &mut TraceWriter, cfg: &Resolved, result: &QuestResult) {
    let interval = cfg.quest_cfg.update_interval;
    for epoch in &result.epochs {
        let t = (epoch.update * interval) as f64;
        let inst = cfg.scenario.instance_at(t);
        let exact = match epoch.estimator {
            DistanceEstimator::Exact => Some(epoch.distance),
            DistanceEstimator::Surrogate => None,
        };
        w.push(
            "quest",
            epoch.update,
            t,
            Some(epoch.distance),
            exact,
            Some(inst.objective_value(&epoch.point)),
            &epoch.point,
        );
    }
}

fn targeting_rows(w: &mut TraceWriter, cfg: &Resolved, state: &TargetingState) {
    let interval = cfg.quest_cfg.update_interval;
    let mut events = state.events().iter().peekable();
    let mut flush_events_before = |w: &mut TraceWriter, k: usize| {
        while let Some(event) = events.peek() {
            if event.at_update > k {
                break;
            }
            let t = (event.at_update * interval) as f64;
            w.push(
                "reacquire",
                event.at_update,
                t,
                None,
                None,
                None,
                &event.center_at_loss,
            );
            quest_rows(w, cfg, &event.quest);
            events.next();
        }
    };
    for record in state.trace() {
        flush_events_before(w, record.time_index);
        let t = (record.time_index * interval) as f64;
        let inst = cfg.scenario.instance_at(t);
        let exact = oracle::supports_exact_distance(&inst)
            .then(|| oracle::exact_distance(&inst, &record.center).ok())
            .flatten();
        w.push(
            "target",
            record.time_index,
            t,
            Some(inst.max_scaled_residual(&record.center)),
            exact,
            Some(record.objective),
            &record.center,
        );
    }
    flush_events_before(w, usize::MAX);
}

fn cmd_quest(cfg: &Resolved) -> Result<u8, String> {
    let result = quest_run(&cfg.scenario, &cfg.start, &cfg.quest_cfg).map_err(|e| e.to_string())?;
    let mut w = TraceWriter::new(cfg.scenario.dim());
    quest_rows(&mut w, cfg, &result);
    w.write_to(&cfg.out)?;
    if result.terminated {
        println!(
            "acquired the polytope after {} updates (distance {})",
            result.updates,
            result.epochs.last().map(|e| e.distance).unwrap_or(0.0)
        );
        Ok(0)
    } else {
        println!(
            "update budget exhausted after {} epochs",
            result.epochs.len()
        );
        Ok(EXIT_BUDGET)
    }
}

fn run_pipeline(cfg: &Resolved) -> Result<(QuestResult, Option<TargetingState>), String> {
    let acquired =
        quest_run(&cfg.scenario, &cfg.start, &cfg.quest_cfg).map_err(|e| e.to_string())?;
    if !acquired.terminated {
        return Ok((acquired, None));
    }
    let state = targeting_run(&cfg.scenario, &acquired, &cfg.targeting, &cfg.quest_cfg)
        .map_err(|e| e.to_string())?;
    Ok((acquired, Some(state)))
}

fn cmd_solve(cfg: &Resolved, trace_quest_phase: bool) -> Result<u8, String> {
    let mut w = TraceWriter::new(cfg.scenario.dim());
    let (acquired, state) = run_pipeline(cfg)?;
    if trace_quest_phase {
        quest_rows(&mut w, cfg, &acquired);
    }
    let Some(state) = state else {
        w.write_to(&cfg.out)?;
        println!(
            "update budget exhausted after {} epochs",
            acquired.epochs.len()
        );
        return Ok(EXIT_BUDGET);
    };
    targeting_rows(&mut w, cfg, &state);
    w.write_to(&cfg.out)?;
    let last = state.trace().last();
    println!(
        "tracked {} steps to k = {} (objective {})",
        state.trace().len(),
        state.time_index(),
        last.map(|r| r.objective.to_string()).unwrap_or_default()
    );
    Ok(0)
}

fn cmd_oracle_check(cfg: &Resolved) -> Result<u8, String> {
    if cfg.scenario.dim() > 3 {
        println!(
            "oracle-check needs n ≤ 3, scenario has n = {}",
            cfg.scenario.dim()
        );
        return Ok(EXIT_UNSUPPORTED_DIM);
    }
    let at_start =
        oracle::exact_lp_solve(&cfg.scenario.instance_at(0.0)).map_err(|e| e.to_string())?;
    if !at_start.feasible {
        println!("infeasible");
        return Ok(EXIT_DEGENERATE);
    }
    if !at_start.bounded {
        println!("unbounded");
        return Ok(EXIT_DEGENERATE);
    }
    let (acquired, state) = run_pipeline(cfg)?;
    let Some(state) = state else {
        println!(
            "update budget exhausted after {} epochs",
            acquired.epochs.len()
        );
        return Ok(EXIT_BUDGET);
    };
    // Steps within the warm-up window after the start or any recovery are
    // reported but not judged.
    let mut warm_until = acquired.updates + WARMUP_STEPS;
    let mut events = state.events().iter().peekable();
    let interval = cfg.quest_cfg.update_interval;
    let mut all_ok = true;
    for record in state.trace() {
        while let Some(event) = events.peek() {
            if event.at_update > record.time_index {
                break;
            }
            warm_until = warm_until.max(event.resumed_update + WARMUP_STEPS);
            events.next();
        }
        let k = record.time_index;
        let inst = cfg.scenario.instance_at((k * interval) as f64);
        let sol = oracle::exact_lp_solve(&inst).map_err(|e| e.to_string())?;
        if !sol.feasible {
            println!("k={k} infeasible");
            return Ok(EXIT_DEGENERATE);
        }
        if !sol.bounded {
            println!("k={k} unbounded");
            return Ok(EXIT_DEGENERATE);
        }
        let gap = (sol.value - record.objective).abs();
        let c = inst.objective();
        let threshold = 2.0 * cfg.targeting.spacing * c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let warm = k < warm_until;
        let verdict = if warm {
            "warmup"
        } else if gap <= threshold {
            "ok"
        } else {
            all_ok = false;
            "FAIL"
        };
        println!(
            "k={k} oracle={} tracked={} gap={gap} threshold={threshold} [{verdict}]",
            sol.value, record.objective
        );
    }
    if all_ok {
        println!("PASS: every post-warm-up gap within threshold");
        Ok(0)
    } else {
        println!("FAIL: tracked objective left the threshold band");
        Ok(EXIT_BUDGET)
    }
}

type CommandFn = fn(&Resolved) -> Result<u8, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, CommandFn) = match &cli.command {
        Command::Quest(a) => (a, cmd_quest),
        Command::Target(a) => (a, |cfg| cmd_solve(cfg, false)),
        Command::Solve(a) => (a, |cfg| cmd_solve(cfg, true)),
        Command::OracleCheck(a) => (a, cmd_oracle_check),
    };
    let cfg = match resolve(args) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_BAD_INPUT);
        }
    };
    match run(&cfg) {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_BUDGET)
        }
    }
}
