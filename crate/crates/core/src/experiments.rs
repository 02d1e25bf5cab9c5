//! Trial drivers for the coverage, probabilistic sensing, communication and
//! tracking studies.
//!
//! Every trial derives its own seed from `(study seed, n, trial)`, and all
//! solvers in a trial share the instance and the round-assignment stream, so
//! rows from different solvers pair up by `(n_agents, trial)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::exec::Execution;
use crate::geom::Point;
use crate::netsim::{account_solver_messages, gen_connected_positions, CommGraph, MessageStats};
use crate::redundancy::{bound_report, redundancy_graph, BoundReport, RedundancyGraph};
use crate::rng::{derive, label, stream};
use crate::scenarios::{
    area_coverage_radii, gen_area_coverage, gen_area_coverage_at, gen_prob_sensing, gen_tracking, Overrides,
};
use crate::setfun::{brute_force_optimum, SetObjective, SimplePartitionMatroid, DEFAULT_ENUMERATION_CAP};
use crate::solvers::{solve, SolveContext, SolverSpec};
use crate::tracking::{run_tracking_trial, StepRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Coverage,
    Probsense,
    Commstudy,
    Track,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Coverage => "coverage",
            Study::Probsense => "probsense",
            Study::Commstudy => "commstudy",
            Study::Track => "track",
        }
    }
}

/// Seed of one trial.
pub fn trial_seed(seed: u64, study: Study, n_agents: usize, trial: usize) -> u64 {
    derive(seed, &[label(study.name()), n_agents as u64, trial as u64])
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub study: Study,
    pub n_agents: usize,
    pub trials: usize,
    pub seed: u64,
    pub solvers: Vec<SolverSpec>,
    pub overrides: Overrides,
    /// Compute redundancy graphs and bound reports for every row.
    pub bounds: bool,
    /// Also compute the exact optimum (small instances only).
    pub exact_optimum: bool,
    pub exec: Execution,
}

impl StudyConfig {
    pub fn new(study: Study, n_agents: usize, trials: usize, seed: u64, solvers: Vec<SolverSpec>) -> Self {
        StudyConfig {
            study,
            n_agents,
            trials,
            seed,
            solvers,
            overrides: Overrides::default(),
            bounds: false,
            exact_optimum: false,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub n_agents: usize,
    pub trial: usize,
    pub seed: u64,
    pub solver: String,
    /// Objective value, or mean post-burn-in target entropy for tracking.
    pub objective: f64,
    pub rounds_used: usize,
    pub converged: bool,
    pub psi: Option<f64>,
    pub optimum: Option<f64>,
    pub filter_resets: Option<usize>,
    pub bounds: Option<BoundReport>,
    pub messages: Option<MessageStats>,
    /// Per-step records of a tracking trial.
    pub steps: Option<Vec<StepRecord>>,
}

struct Instance<F> {
    f: F,
    m: SimplePartitionMatroid,
    positions: Vec<Point>,
    comm: CommGraph,
}

fn static_instance(cfg: &StudyConfig, seed: u64) -> Result<Instance<Box<dyn DynObjective>>> {
    let n = cfg.n_agents;
    let mut rng = stream(seed, &[label("instance")]);
    let (f, m, positions, default_range): (Box<dyn DynObjective>, _, _, _) = match cfg.study {
        Study::Coverage => {
            let sc = gen_area_coverage(n, &cfg.overrides.area_params(), &mut rng)?;
            (Box::new(sc.problem), sc.matroid, sc.positions, 3.0 * sc.r_a)
        }
        Study::Commstudy => {
            let r_c = cfg.overrides.comm_range.unwrap_or(3.0 * area_coverage_radii(n).1);
            let positions = gen_connected_positions(n, r_c, &mut rng)?;
            let sc = gen_area_coverage_at(positions, &cfg.overrides.area_params(), &mut rng)?;
            (Box::new(sc.problem), sc.matroid, sc.positions, r_c)
        }
        Study::Probsense => {
            let sc = gen_prob_sensing(n, &cfg.overrides.prob_params(), &mut rng)?;
            (Box::new(sc.problem), sc.matroid, sc.positions, sc.r_c)
        }
        Study::Track => return invalid_arg("tracking trials are run by run_tracking_study"),
    };
    let comm = CommGraph::geometric(positions.clone(), cfg.overrides.comm_range.unwrap_or(default_range))?;
    Ok(Instance { f, m, positions, comm })
}

/// Object-safe view of the static objectives so that one driver handles
/// both families.
pub trait DynObjective: Send + Sync {
    fn solve(&self, spec: &SolverSpec, m: &SimplePartitionMatroid, ctx: &SolveContext<'_>, seed: u64)
        -> Result<crate::solvers::SolveResult>;
    fn weights(&self, m: &SimplePartitionMatroid, exec: Execution) -> RedundancyGraph;
    fn bounds(
        &self,
        m: &SimplePartitionMatroid,
        r: &crate::solvers::SolveResult,
        g: &RedundancyGraph,
    ) -> Result<BoundReport>;
    fn optimum(&self, m: &SimplePartitionMatroid) -> Result<f64>;
}

impl<F: SetObjective + Send> DynObjective for F {
    fn solve(
        &self,
        spec: &SolverSpec,
        m: &SimplePartitionMatroid,
        ctx: &SolveContext<'_>,
        seed: u64,
    ) -> Result<crate::solvers::SolveResult> {
        let mut rng = stream(seed, &[label("solver")]);
        solve(spec, self, m, ctx, &mut rng)
    }

    fn weights(&self, m: &SimplePartitionMatroid, exec: Execution) -> RedundancyGraph {
        redundancy_graph(self, m, exec)
    }

    fn bounds(
        &self,
        m: &SimplePartitionMatroid,
        r: &crate::solvers::SolveResult,
        g: &RedundancyGraph,
    ) -> Result<BoundReport> {
        bound_report(self, m, r, g)
    }

    fn optimum(&self, m: &SimplePartitionMatroid) -> Result<f64> {
        brute_force_optimum(self, m, DEFAULT_ENUMERATION_CAP).map(|(_, v)| v)
    }
}

/// All solver rows for one trial of a static study.
pub fn run_static_trial(cfg: &StudyConfig, trial: usize) -> Result<Vec<TrialRow>> {
    let seed = trial_seed(cfg.seed, cfg.study, cfg.n_agents, trial);
    let inst = static_instance(cfg, seed)?;
    let need_weights = cfg.bounds || cfg.solvers.iter().any(SolverSpec::needs_weights);
    let weights = need_weights.then(|| inst.f.weights(&inst.m, cfg.exec));
    let optimum = if cfg.exact_optimum { Some(inst.f.optimum(&inst.m)?) } else { None };
    let ctx = SolveContext {
        positions: Some(&inst.positions),
        weights: weights.as_ref(),
        comm: Some(&inst.comm),
        exec: cfg.exec,
    };
    let connected = inst.comm.is_connected();
    cfg.solvers
        .iter()
        .map(|spec| {
            let r = inst.f.solve(spec, &inst.m, &ctx, seed)?;
            let bounds = match (&weights, cfg.bounds) {
                (Some(g), true) => Some(inst.f.bounds(&inst.m, &r, g)?),
                _ => None,
            };
            let messages = connected.then(|| account_solver_messages(&r, &inst.comm).ok()).flatten();
            Ok(TrialRow {
                n_agents: cfg.n_agents,
                trial,
                seed,
                solver: spec.to_string(),
                objective: r.value,
                rounds_used: r.rounds_used,
                converged: r.converged,
                psi: r.psi,
                optimum,
                filter_resets: None,
                bounds,
                messages,
                steps: None,
            })
        })
        .collect()
}

/// Rows of the tracking study for one trial.
pub fn run_tracking_trial_rows(cfg: &StudyConfig, trial: usize) -> Result<Vec<TrialRow>> {
    let seed = trial_seed(cfg.seed, Study::Track, cfg.n_agents, trial);
    let mut sc = gen_tracking(cfg.n_agents, seed)?;
    cfg.overrides.apply_tracking(&mut sc);
    cfg.solvers
        .iter()
        .map(|spec| {
            let rec = run_tracking_trial(&sc, spec, cfg.exec)?;
            Ok(TrialRow {
                n_agents: cfg.n_agents,
                trial,
                seed,
                solver: spec.to_string(),
                objective: rec.summary_entropy,
                rounds_used: 0,
                converged: true,
                psi: None,
                optimum: None,
                filter_resets: Some(rec.filter_resets),
                bounds: None,
                messages: None,
                steps: Some(rec.steps),
            })
        })
        .collect()
}

/// Every row of a study, in `(trial, solver)` order.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<TrialRow>> {
    if cfg.n_agents == 0 {
        return invalid_arg("need at least one agent");
    }
    if cfg.solvers.is_empty() {
        return invalid_arg("need at least one solver");
    }
    let per_trial = cfg.exec.map(cfg.trials, |t| match cfg.study {
        Study::Track => run_tracking_trial_rows(cfg, t),
        _ => run_static_trial(cfg, t),
    });
    let mut rows = Vec::new();
    for r in per_trial {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Objective values of one solver, in trial order.
pub fn objectives_of(rows: &[TrialRow], solver: &str) -> Vec<f64> {
    rows.iter().filter(|r| r.solver == solver).map(|r| r.objective).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs(s: &[&str]) -> Vec<SolverSpec> {
        s.iter().map(|x| x.parse().unwrap()).collect()
    }

    #[test]
    fn rows_are_deterministic_and_ordered() {
        let mut cfg = StudyConfig::new(Study::Probsense, 12, 3, 5, specs(&["sequential", "rsp:2", "rsp:global:0.03"]));
        cfg.bounds = true;
        let a = run_study(&cfg).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a, run_study(&cfg).unwrap());
        assert_eq!(a[4].trial, 1);
        assert_eq!(a[4].solver, "rsp:2");
        for r in &a {
            let b = r.bounds.unwrap();
            assert!(b.posthoc >= r.objective && b.online >= r.objective - 1e-12);
        }
    }

    #[test]
    fn exact_optimum_dominates() {
        let mut cfg = StudyConfig::new(Study::Probsense, 4, 2, 1, specs(&["sequential", "myopic"]));
        cfg.overrides.actions_per_agent = Some(3);
        cfg.exact_optimum = true;
        for r in run_study(&cfg).unwrap() {
            assert!(r.optimum.unwrap() >= r.objective - 1e-12);
        }
    }

    #[test]
    fn commstudy_graph_is_connected() {
        let mut cfg = StudyConfig::new(Study::Commstudy, 20, 2, 3, specs(&["sequential", "auction:global"]));
        cfg.overrides.grid_resolution = Some(64);
        for r in run_study(&cfg).unwrap() {
            assert!(r.messages.is_some(), "{r:?}");
        }
    }

    #[test]
    fn tracking_rejects_static_driver() {
        let cfg = StudyConfig::new(Study::Track, 4, 1, 0, specs(&["myopic"]));
        assert!(run_static_trial(&cfg, 0).is_err());
    }
}
