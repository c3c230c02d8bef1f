//! `nfold`: command-line front-end for the n-fold solver and its
//! applications.
//!
//! Exit status is 0 on success (an infeasible verdict is a success), 1 for
//! usage and input errors, 2 when the solver trips over one of its own
//! consistency checks.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nfold::format::{parse_instance, result_to_json};
use nfold::oracle::OracleBudget;
use nfold::random::{random_instance, RandomParams};
use nfold::table::TableError;
use nfold::{build_plan, solve_validated, EngineConfig, Mode, SolveError, SolverConfig};
use nfold_apps::closest_string::{self as cs, ClosestStringError, StringInstance};
use nfold_apps::imbalance::{self as im, GraphInstance, ImbalanceConfig, ImbalanceError};
use nfold_apps::reports::{core_check, scheduling_check, ReportError};
use nfold_apps::scheduling::{self as sched, Objective, SchedulingConfig, SchedulingError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "nfold", version, about = "Exact solver for combinatorial n-fold integer programs")]
struct Cli {
    /// Worker threads for the table engine (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve an n-fold instance given as JSON.
    Solve {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Feasibility)]
        mode: ModeArg,
        /// Largest number of cells a single table may hold.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Print the iteration plan (support bound, box radius, schedules).
    Plan {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Feasibility)]
        mode: ModeArg,
    },
    /// Schedule jobs on uniformly related machines (Cmax or Cmin).
    Schedule {
        #[command(flatten)]
        io: IoArgs,
        #[arg(long, value_enum)]
        objective: ObjectiveArg,
        /// Small/big machine threshold; for testing the big-machine path.
        #[arg(long)]
        small_threshold_override: Option<i64>,
    },
    /// Find a center string of minimum (or bounded) Hamming radius.
    ClosestString {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Find a vertex ordering of minimum imbalance.
    Imbalance {
        #[command(flatten)]
        io: IoArgs,
    },
    /// Compare solvers against brute force on seeded random instances and
    /// write a JSON-lines report.
    OracleCheck {
        #[arg(long, value_enum, default_value_t = Suite::Core)]
        suite: Suite,
        #[arg(long, value_enum, default_value_t = ModeArg::Feasibility)]
        mode: ModeArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Oracle enumeration steps per instance.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time the solver on random instances of growing size and emit CSV.
    Bench {
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Feasibility)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct IoArgs {
    /// Input JSON file; standard input when omitted.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Feasibility,
    Optimize,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Feasibility => Mode::Feasibility,
            ModeArg::Optimize => Mode::Optimization,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ObjectiveArg {
    Cmax,
    Cmin,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Suite {
    Core,
    Scheduling,
}

/// A failed run: the message and the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn internal(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::CorruptWitness(_) => Failure::internal(e),
            _ => Failure::usage(e),
        }
    }
}

/// Errors raised while solving an ILP the application built itself: only a
/// blown table budget is the caller's business.
fn nested(e: SolveError) -> Failure {
    match e {
        SolveError::Table(TableError::StateSpaceExceeded { .. }) => Failure::usage(e),
        _ => Failure::internal(e),
    }
}

impl From<SchedulingError> for Failure {
    fn from(e: SchedulingError) -> Self {
        match e {
            SchedulingError::Invalid(_) => Failure::usage(e),
            SchedulingError::Solve(s) => nested(s),
            _ => Failure::internal(e),
        }
    }
}

impl From<ClosestStringError> for Failure {
    fn from(e: ClosestStringError) -> Self {
        match e {
            ClosestStringError::Empty
            | ClosestStringError::RaggedLengths { .. }
            | ClosestStringError::NegativeRadius(_) => Failure::usage(e),
            ClosestStringError::Solve(s) => nested(s),
            _ => Failure::internal(e),
        }
    }
}

impl From<ImbalanceError> for Failure {
    fn from(e: ImbalanceError) -> Self {
        match e {
            ImbalanceError::VertexOutOfRange { .. }
            | ImbalanceError::SelfLoop(_)
            | ImbalanceError::DuplicateEdge(_)
            | ImbalanceError::CoverTooLarge { .. } => Failure::usage(e),
            ImbalanceError::Solve(s) => nested(s),
            _ => Failure::internal(e),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Solve(s) => nested(s),
            ReportError::Scheduling(s) => s.into(),
            _ => Failure::internal(e),
        }
    }
}

fn read_input(path: Option<&Path>) -> Result<String, Failure> {
    match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Failure::usage(format!("--in {}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|e| Failure::usage(format!("reading standard input: {e}")))?;
            Ok(s)
        }
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::usage(format!("invalid input: {e}")))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| Failure::usage(format!("--out {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output documents always serialize")
}

fn solver_config(budget: Option<usize>) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    if let Some(b) = budget {
        cfg.engine = EngineConfig {
            cell_budget: b,
            ..cfg.engine
        };
    }
    cfg
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve { io, mode, budget } => {
            let inst = parse_instance(&read_input(io.input.as_deref())?)
                .map_err(|e| Failure::usage(format!("invalid instance: {e}")))?;
            let inst = inst.validate().map_err(Failure::usage)?;
            let (out, _) = solve_validated(&inst, mode.into(), &solver_config(budget))?;
            info!("status {:?} after {} iterations", out.status, out.stats.iterations);
            write_output(io.out.as_deref(), &result_to_json(&out))
        }
        Command::Plan { io, mode } => {
            let inst = parse_instance(&read_input(io.input.as_deref())?)
                .map_err(|e| Failure::usage(format!("invalid instance: {e}")))?;
            let inst = inst.validate().map_err(Failure::usage)?;
            write_output(io.out.as_deref(), &pretty(&build_plan(&inst, mode.into())))
        }
        Command::Schedule {
            io,
            objective,
            small_threshold_override,
        } => {
            let inst: sched::SchedulingInstance = parse_json(&read_input(io.input.as_deref())?)?;
            let objective = match objective {
                ObjectiveArg::Cmax => Objective::Cmax,
                ObjectiveArg::Cmin => Objective::Cmin,
            };
            let cfg = SchedulingConfig {
                small_threshold_override,
                ..SchedulingConfig::default()
            };
            let s = sched::solve_objective(&inst, objective, &cfg)?;
            write_output(io.out.as_deref(), &pretty(&s))
        }
        Command::ClosestString { io } => {
            let inst: StringInstance = parse_json(&read_input(io.input.as_deref())?)?;
            let doc = match cs::solve_closest(&inst.strings, inst.d, &SolverConfig::default())? {
                Some(r) => json!(r),
                None => json!({ "status": "infeasible", "d": inst.d }),
            };
            write_output(io.out.as_deref(), &pretty(&doc))
        }
        Command::Imbalance { io } => {
            let graph: GraphInstance = parse_json(&read_input(io.input.as_deref())?)?;
            let r = im::solve_imbalance(&graph, &ImbalanceConfig::default())?;
            write_output(io.out.as_deref(), &pretty(&r))
        }
        Command::OracleCheck {
            suite,
            mode,
            trials,
            seed,
            budget,
            out,
        } => {
            let report = match suite {
                Suite::Core => {
                    let budget = budget.map_or_else(OracleBudget::default, |max_steps| {
                        OracleBudget { max_steps }
                    });
                    core_check(seed, trials, mode.into(), &budget, &SolverConfig::default())?
                }
                Suite::Scheduling => {
                    scheduling_check(seed, trials, &SchedulingConfig::default())?
                }
            };
            eprintln!(
                "{}: seed {}, {} trials, {} agree, {} skipped, {} mismatches",
                report.check,
                report.seed,
                report.trials,
                report.agreements,
                report.skipped,
                report.mismatches()
            );
            write_output(out.as_deref(), &report.to_jsonl())
        }
        Command::Bench {
            trials,
            seed,
            mode,
            out,
        } => {
            let csv = bench(trials, seed, mode.into())?;
            write_output(out.as_deref(), &csv)
        }
    }
}

/// Random instances with growing lower right-hand sides; one CSV row each.
fn bench(trials: usize, seed: u64, mode: Mode) -> Result<String, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from(
        "seed,b_low_max,trial,n,r,delta,status,iterations,support_bound,box_radius,base_cells,max_level_cells,wall_ms\n",
    );
    for b_low_max in [10, 30, 100, 300, 1000] {
        let params = RandomParams {
            b_low_max,
            c_max: (mode == Mode::Optimization).then_some(5),
            ..RandomParams::default()
        };
        for trial in 0..trials {
            let inst = random_instance(&mut rng, &params)
                .validate()
                .map_err(Failure::internal)?;
            let start = Instant::now();
            let (out, _) = solve_validated(&inst, mode, &SolverConfig::default())?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            let s = &out.stats;
            let _ = writeln!(
                csv,
                "{seed},{b_low_max},{trial},{},{},{},{},{},{},{},{},{},{ms:.3}",
                inst.n(),
                inst.r(),
                inst.delta(),
                serde_json::to_value(out.status).expect("status serializes").as_str().unwrap_or(""),
                s.iterations,
                s.support_bound,
                s.box_radius,
                s.base_cells,
                s.level_cells.iter().max().copied().unwrap_or(0),
            );
        }
    }
    Ok(csv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("NFOLD_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = std::panic::catch_unwind(|| run(cli.command))
        .unwrap_or_else(|_| Err(Failure::internal("internal assertion failed")));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
