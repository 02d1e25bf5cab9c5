//! `submod-swarm`: run the coverage, sensing, tracking and communication
//! studies, compare result files and run the small-instance checks.

mod compare;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use submod_swarm::checks::tiny_suite;
use submod_swarm::exec::{set_worker_threads, Execution};
use submod_swarm::experiments::{run_study, Study, StudyConfig};

use config::{FileConfig, FlagConfig, RunConfig, SEED_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    TooLarge(String),
    #[error("{0}")]
    Run(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::TooLarge(_) => 3,
            _ => 1,
        }
    }
}

impl From<submod_swarm::Error> for CliError {
    fn from(e: submod_swarm::Error) -> Self {
        match e {
            submod_swarm::Error::TooLarge { .. } => CliError::TooLarge(e.to_string()),
            submod_swarm::Error::InvalidArgument(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "submod-swarm", version = output::VERSION, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Grid area coverage with disk sensors.
    Coverage(RunArgs),
    /// Probabilistic event detection.
    Probsense(RunArgs),
    /// Multi-target tracking with range sensors.
    Track(RunArgs),
    /// Message accounting on connected area coverage instances.
    Commstudy(RunArgs),
    /// Join result files on (n_agents, trial) and report paired deltas.
    Compare(CompareArgs),
    /// Randomized small-instance checks against exhaustive optima.
    Tinycheck(TinyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config with keys family, n_agents, trials, seed, solver, overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Solver spec, e.g. sequential, rsp:4, rrsp:global:0.01:0.3, auction:local.
    #[arg(long, value_delimiter = ',')]
    solver: Vec<String>,
    /// Team sizes; a list runs each size in turn.
    #[arg(long, value_delimiter = ',')]
    agents: Vec<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Falls back to the SUBMOD_SWARM_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything on the calling thread.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Replace the round count of fixed-round solvers and the auction round cap.
    #[arg(long)]
    rounds: Option<usize>,
    /// Replace gamma in adaptive round policies.
    #[arg(long)]
    gamma: Option<f64>,
    /// Communication range for auctions and message accounting.
    #[arg(long)]
    comm_range: Option<f64>,
    /// Monte-Carlo samples per tracking evaluation.
    #[arg(long)]
    samples: Option<usize>,
    /// Area coverage grid resolution.
    #[arg(long)]
    grid_resolution: Option<usize>,
    /// Skip redundancy graphs and bounds.
    #[arg(long)]
    no_bounds: bool,
    /// Also compute exact optima by enumeration (small instances only).
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// results.csv files or run directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Baseline solver; defaults to the first solver of the first input.
    #[arg(long)]
    baseline: Option<String>,
    /// Write the comparison here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TinyArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Run the coverage batteries on a sign-flipped objective.
    #[arg(long)]
    mutant: bool,
}

fn run(study: Study, args: RunArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = FlagConfig {
        solvers: args.solver,
        agents: args.agents,
        trials: args.trials,
        seed: args.seed,
        rounds: args.rounds,
        gamma: args.gamma,
        comm_range: args.comm_range,
        samples: args.samples,
        grid_resolution: args.grid_resolution,
        no_bounds: args.no_bounds,
        exact: args.exact,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let (cfg, specs) = RunConfig::resolve(study, file, &flags, env_seed.as_deref())?;
    let exec = match args.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be positive".into())),
        Some(1) => Execution::Sequential,
        Some(j) => {
            set_worker_threads(j);
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let mut rows = Vec::new();
    for &n in &cfg.n_agents {
        let mut sc = StudyConfig::new(study, n, cfg.trials, cfg.seed, specs.clone());
        sc.overrides = cfg.overrides.clone();
        sc.bounds = cfg.bounds;
        sc.exact_optimum = cfg.exact_optimum;
        sc.exec = exec;
        rows.extend(run_study(&sc)?);
    }
    output::write_run(&args.out, &cfg, &rows)?;
    for a in output::aggregates(&rows) {
        eprintln!(
            "{:>24} n={:<4} mean {:.6} ± {:.6} ({} trials)",
            a.solver, a.n_agents, a.mean, a.stderr, a.trials
        );
    }
    eprintln!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<(), CliError> {
    let summaries = match &args.out {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            compare::compare(&args.inputs, args.baseline.as_deref(), &mut f)?
        }
        None => compare::compare(&args.inputs, args.baseline.as_deref(), &mut std::io::stdout().lock())?,
    };
    for s in summaries {
        eprintln!("{:>28} mean delta {:+.6} ± {:.6} over {} pairs", s.label, s.mean_delta, s.stderr, s.pairs);
    }
    Ok(())
}

/// Returns the number of failed checks.
fn run_tinycheck(args: TinyArgs) -> usize {
    let outcomes = tiny_suite(args.seed, args.cases, args.mutant);
    println!("{:<44} {:>6} {:>10} {:>10}  result", "check", "cases", "violations", "worst");
    for o in &outcomes {
        println!(
            "{:<44} {:>6} {:>10} {:>10.3e}  {}",
            o.name,
            o.cases,
            o.violations,
            o.worst,
            if o.passed() { "PASS" } else { "FAIL" }
        );
    }
    outcomes.iter().filter(|o| !o.passed()).count()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Coverage(a) => run(Study::Coverage, a),
        Command::Probsense(a) => run(Study::Probsense, a),
        Command::Track(a) => run(Study::Track, a),
        Command::Commstudy(a) => run(Study::Commstudy, a),
        Command::Compare(a) => run_compare(a),
        Command::Tinycheck(a) => return ExitCode::from(run_tinycheck(a).min(125) as u8),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
