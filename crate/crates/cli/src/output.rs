//! Result files: `results.csv`, `bounds.csv`, `messages.csv`,
//! `manifest.json`, and `steps.csv` for tracking runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use submod_swarm::experiments::TrialRow;
use submod_swarm::stats::summarize;

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("SUBMOD_SWARM_GIT_DESCRIBE");

pub const RESULTS_HEADER: [&str; 11] = [
    "family",
    "n_agents",
    "trial",
    "seed",
    "solver",
    "objective",
    "rounds_used",
    "converged",
    "psi",
    "optimum",
    "filter_resets",
];

/// Floats with 17 significant digits, which round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T>(x: Option<T>, f: impl Fn(T) -> String) -> String {
    x.map(f).unwrap_or_default()
}

/// Aggregate of one `(solver, n_agents)` group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub solver: String,
    pub n_agents: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
}

/// Groups in order of first appearance.
pub fn aggregates(rows: &[TrialRow]) -> Vec<Aggregate> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let k = (r.solver.clone(), r.n_agents);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(solver, n)| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.solver == solver && r.n_agents == n)
                .map(|r| r.objective)
                .collect();
            let s = summarize(&xs);
            Aggregate {
                solver,
                n_agents: n,
                trials: s.n,
                mean: s.mean,
                std: s.std,
                stderr: s.stderr,
            }
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    #[serde(flatten)]
    config: &'a RunConfig,
    version: &'static str,
    summary: Vec<Aggregate>,
}

fn csv_file(path: &Path, cfg: &RunConfig) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
    writeln!(w, "# seed={} version={}", cfg.seed, VERSION).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(w))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_run(dir: &Path, cfg: &RunConfig, rows: &[TrialRow]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let family = cfg.family.name();

    let path = dir.join("results.csv");
    let mut w = csv_file(&path, cfg)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            family.to_string(),
            r.n_agents.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.solver.clone(),
            fmt_f64(r.objective),
            r.rounds_used.to_string(),
            r.converged.to_string(),
            opt(r.psi, fmt_f64),
            opt(r.optimum, fmt_f64),
            opt(r.filter_resets, |v| v.to_string()),
        ])?;
    }
    finish(&path, w)?;

    let path = dir.join("bounds.csv");
    let mut w = csv_file(&path, cfg)?;
    w.write_record([
        "n_agents",
        "trial",
        "solver",
        "value",
        "deleted_weight",
        "posthoc",
        "online",
        "oblivious",
        "subopt_lb",
    ])?;
    for r in rows {
        if let Some(b) = &r.bounds {
            let mut rec = vec![r.n_agents.to_string(), r.trial.to_string(), r.solver.clone()];
            rec.extend([b.value, b.deleted_weight, b.posthoc, b.online, b.oblivious, b.subopt_lb].map(fmt_f64));
            w.write_record(rec)?;
        }
    }
    finish(&path, w)?;

    let path = dir.join("messages.csv");
    let mut w = csv_file(&path, cfg)?;
    w.write_record([
        "n_agents",
        "trial",
        "solver",
        "objective",
        "messages",
        "volume",
        "span",
        "converged",
        "wasted",
    ])?;
    for r in rows {
        if let Some(m) = &r.messages {
            w.write_record([
                r.n_agents.to_string(),
                r.trial.to_string(),
                r.solver.clone(),
                fmt_f64(r.objective),
                m.messages.to_string(),
                m.volume.to_string(),
                m.span.to_string(),
                r.converged.to_string(),
                m.wasted.to_string(),
            ])?;
        }
    }
    finish(&path, w)?;

    if rows.iter().any(|r| r.steps.is_some()) {
        let path = dir.join("steps.csv");
        let mut w = csv_file(&path, cfg)?;
        w.write_record(["trial", "step", "solver", "n_robots", "mean_entropy_bits", "objective", "planning_evals"])?;
        for r in rows {
            for s in r.steps.iter().flatten() {
                w.write_record([
                    r.trial.to_string(),
                    s.step.to_string(),
                    r.solver.clone(),
                    r.n_agents.to_string(),
                    fmt_f64(s.mean_entropy_bits),
                    fmt_f64(s.objective),
                    s.planning_evals.to_string(),
                ])?;
            }
        }
        finish(&path, w)?;
    }

    let path = dir.join("manifest.json");
    let manifest = Manifest {
        config: cfg,
        version: VERSION,
        summary: aggregates(rows),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// One parsed row of `results.csv`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct ResultRecord {
    pub family: String,
    pub n_agents: usize,
    pub trial: usize,
    pub seed: u64,
    pub solver: String,
    pub objective: f64,
    pub rounds_used: usize,
    pub converged: bool,
    pub psi: Option<f64>,
    pub optimum: Option<f64>,
    pub filter_resets: Option<usize>,
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    r.deserialize()
        .collect::<Result<Vec<ResultRecord>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
