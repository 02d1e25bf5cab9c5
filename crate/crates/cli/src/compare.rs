//! Paired comparison of result files.
//!
//! A run is one `(file, solver)` pair. Every run is joined to the baseline
//! run on `(n_agents, trial)`; `delta` is baseline minus run, and
//! `ratio_to_sequential` divides by the first `sequential` run found.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use submod_swarm::stats::{paired, summarize};

use crate::output::{fmt_f64, read_results, ResultRecord};
use crate::CliError;

type Key = (usize, usize);

struct Run {
    file: usize,
    solver: String,
    values: BTreeMap<Key, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunDelta {
    pub label: String,
    pub pairs: usize,
    pub mean_delta: f64,
    pub stderr: f64,
}

fn results_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("results.csv")
    } else {
        p.to_path_buf()
    }
}

fn group(records: Vec<(usize, ResultRecord)>) -> Result<Vec<Run>, CliError> {
    let mut seeds: BTreeMap<Key, (u64, usize)> = BTreeMap::new();
    let mut runs: Vec<Run> = Vec::new();
    for (file, r) in records {
        let key = (r.n_agents, r.trial);
        match seeds.get(&key) {
            Some(&(s, f)) if s != r.seed => {
                return Err(CliError::Config(format!(
                    "seed mismatch at n_agents={} trial={}: {s} in input {} but {} in input {}",
                    key.0,
                    key.1,
                    f + 1,
                    r.seed,
                    file + 1
                )))
            }
            Some(_) => {}
            None => {
                seeds.insert(key, (r.seed, file));
            }
        }
        let idx = match runs.iter().position(|x| x.file == file && x.solver == r.solver) {
            Some(i) => i,
            None => {
                runs.push(Run {
                    file,
                    solver: r.solver.clone(),
                    values: BTreeMap::new(),
                });
                runs.len() - 1
            }
        };
        runs[idx].values.insert(key, r.objective);
    }
    Ok(runs)
}

/// Write the comparison CSV to `out` and return per-run summaries.
pub fn compare(inputs: &[PathBuf], baseline: Option<&str>, out: &mut dyn Write) -> Result<Vec<RunDelta>, CliError> {
    if inputs.len() < 2 && baseline.is_none() {
        return Err(CliError::Config("compare needs two inputs, or one input and --baseline".into()));
    }
    let mut records = Vec::new();
    for (i, p) in inputs.iter().enumerate() {
        records.extend(read_results(&results_path(p))?.into_iter().map(|r| (i, r)));
    }
    let runs = group(records)?;
    if runs.is_empty() {
        return Err(CliError::Config("inputs contain no rows".into()));
    }
    let base = match baseline {
        Some(s) => runs
            .iter()
            .position(|r| r.solver == s)
            .ok_or_else(|| CliError::Config(format!("baseline solver '{s}' not found")))?,
        None => 0,
    };
    let seq = runs.iter().position(|r| r.solver == "sequential");
    let label = |r: &Run| format!("{}:{}", r.file + 1, r.solver);

    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n_agents",
        "trial",
        "baseline",
        "run",
        "baseline_objective",
        "objective",
        "delta",
        "ratio_to_sequential",
    ])?;
    let mut summaries = Vec::new();
    for (k, run) in runs.iter().enumerate() {
        if k == base {
            continue;
        }
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (key, &v) in &run.values {
            let Some(&bv) = runs[base].values.get(key) else { continue };
            let ratio = seq.and_then(|s| runs[s].values.get(key)).map(|s| fmt_f64(v / s)).unwrap_or_default();
            w.write_record([
                key.0.to_string(),
                key.1.to_string(),
                label(&runs[base]),
                label(run),
                fmt_f64(bv),
                fmt_f64(v),
                fmt_f64(bv - v),
                ratio,
            ])?;
            a.push(bv);
            b.push(v);
        }
        let d = if a.is_empty() { summarize(&[]) } else { paired(&a, &b) };
        summaries.push(RunDelta {
            label: label(run),
            pairs: a.len(),
            mean_delta: d.mean,
            stderr: d.stderr,
        });
    }
    w.flush().map_err(|e| CliError::Run(format!("cannot write comparison: {e}")))?;
    Ok(summaries)
}
