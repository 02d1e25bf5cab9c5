//! Run configuration: JSON file, command-line flags and their resolution.

use std::path::Path;

use serde::{Deserialize, Serialize};
use submod_swarm::experiments::Study;
use submod_swarm::scenarios::Overrides;
use submod_swarm::solvers::{RoundPolicy, SolverSpec};

use crate::CliError;

pub const SEED_ENV: &str = "SUBMOD_SWARM_SEED";
const DEFAULT_SEED: u64 = 1;
const DEFAULT_TRIALS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(v) => v,
        }
    }
}

/// Contents of a `--config` file. A `manifest.json` written by a run is also
/// a valid config; its `version` and `summary` keys are ignored.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub family: Option<Study>,
    pub n_agents: Option<OneOrMany<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub solver: Option<OneOrMany<String>>,
    #[serde(default)]
    pub overrides: Overrides,
    pub bounds: Option<bool>,
    pub exact_optimum: Option<bool>,
    #[serde(default, rename = "version")]
    _version: Option<serde_json::Value>,
    #[serde(default, rename = "summary")]
    _summary: Option<serde_json::Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Values given on the command line; each one overrides the file.
#[derive(Clone, Debug, Default)]
pub struct FlagConfig {
    pub solvers: Vec<String>,
    pub agents: Vec<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub rounds: Option<usize>,
    pub gamma: Option<f64>,
    pub comm_range: Option<f64>,
    pub samples: Option<usize>,
    pub grid_resolution: Option<usize>,
    pub no_bounds: bool,
    pub exact: bool,
}

/// Fully resolved run parameters, echoed into `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub family: Study,
    pub n_agents: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub solver: Vec<String>,
    pub overrides: Overrides,
    pub bounds: bool,
    pub exact_optimum: bool,
}

fn default_agents(study: Study) -> Vec<usize> {
    match study {
        Study::Coverage | Study::Probsense => vec![50],
        Study::Track => vec![8],
        Study::Commstudy => (1..=10).map(|k| 10 * k).collect(),
    }
}

fn with_rounds(spec: SolverSpec, n_d: usize) -> SolverSpec {
    match spec {
        SolverSpec::Dsga(_) => SolverSpec::Dsga(n_d),
        SolverSpec::Rsp(RoundPolicy::Fixed(_)) => SolverSpec::Rsp(RoundPolicy::Fixed(n_d)),
        SolverSpec::Rrsp(RoundPolicy::Fixed(_), r) => SolverSpec::Rrsp(RoundPolicy::Fixed(n_d), r),
        SolverSpec::Auction(k, _) => SolverSpec::Auction(k, Some(n_d)),
        other => other,
    }
}

fn with_gamma(spec: SolverSpec, g: f64) -> SolverSpec {
    let swap = |p: RoundPolicy| match p {
        RoundPolicy::GlobalAdaptive(_) => RoundPolicy::GlobalAdaptive(g),
        RoundPolicy::LocalAdaptive(_) => RoundPolicy::LocalAdaptive(g),
        fixed => fixed,
    };
    match spec {
        SolverSpec::Rsp(p) => SolverSpec::Rsp(swap(p)),
        SolverSpec::Rrsp(p, r) => SolverSpec::Rrsp(swap(p), r),
        other => other,
    }
}

fn positive<T: PartialOrd + Default + std::fmt::Display>(name: &str, v: T) -> Result<T, CliError> {
    if v > T::default() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Merge file and flags. `env_seed` is the value of [`SEED_ENV`], if set.
    pub fn resolve(
        study: Study,
        file: FileConfig,
        flags: &FlagConfig,
        env_seed: Option<&str>,
    ) -> Result<(Self, Vec<SolverSpec>), CliError> {
        if let Some(f) = file.family {
            if f != study {
                return Err(CliError::Config(format!(
                    "config is for family '{}' but the subcommand is '{}'",
                    f.name(),
                    study.name()
                )));
            }
        }
        let env_seed = env_seed
            .map(|s| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}='{s}' is not an unsigned integer")))
            })
            .transpose()?;
        let seed = flags.seed.or(file.seed).or(env_seed).unwrap_or(DEFAULT_SEED);
        let n_agents = if !flags.agents.is_empty() {
            flags.agents.clone()
        } else {
            file.n_agents.map(OneOrMany::into_vec).unwrap_or_else(|| default_agents(study))
        };
        for &n in &n_agents {
            positive("agent count", n)?;
        }
        let trials = positive("trial count", flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS))?;
        let names = if !flags.solvers.is_empty() {
            flags.solvers.clone()
        } else {
            file.solver.map(OneOrMany::into_vec).unwrap_or_else(|| vec!["sequential".to_string()])
        };
        let mut specs = Vec::with_capacity(names.len());
        for name in &names {
            let mut spec: SolverSpec = name.parse().map_err(CliError::from)?;
            if let Some(n_d) = flags.rounds {
                spec = with_rounds(spec, positive("--rounds", n_d)?);
            }
            if let Some(g) = flags.gamma {
                spec = with_gamma(spec, positive("--gamma", g)?);
            }
            if study == Study::Track && spec.needs_comm_graph() {
                return Err(CliError::Config(format!("solver {spec} is not supported for tracking")));
            }
            specs.push(spec);
        }
        let mut overrides = file.overrides;
        if let Some(r) = flags.comm_range {
            overrides.comm_range = Some(positive("--comm-range", r)?);
        }
        if let Some(s) = flags.samples {
            overrides.n_samples = Some(positive("--samples", s)?);
        }
        if let Some(g) = flags.grid_resolution {
            overrides.grid_resolution = Some(positive("--grid-resolution", g)?);
        }
        let bounds = !flags.no_bounds && file.bounds.unwrap_or(study != Study::Track);
        if bounds && study == Study::Track {
            return Err(CliError::Config("bounds are not available for tracking".into()));
        }
        let exact_optimum = flags.exact || file.exact_optimum.unwrap_or(false);
        let cfg = RunConfig {
            family: study,
            n_agents,
            trials,
            seed,
            solver: specs.iter().map(ToString::to_string).collect(),
            overrides,
            bounds,
            exact_optimum,
        };
        Ok((cfg, specs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(json: &str) -> FileConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn flags_override_file_and_env_is_last() {
        let f = file(r#"{"family":"coverage","n_agents":20,"trials":3,"seed":9,"solver":["rsp:2","myopic"]}"#);
        let (c, _) = RunConfig::resolve(Study::Coverage, f.clone(), &FlagConfig::default(), Some("5")).unwrap();
        assert_eq!((c.n_agents.clone(), c.trials, c.seed), (vec![20], 3, 9));
        assert_eq!(c.solver, ["rsp:2", "myopic"]);
        let flags = FlagConfig {
            seed: Some(4),
            rounds: Some(8),
            agents: vec![10, 30],
            ..Default::default()
        };
        let (c, _) = RunConfig::resolve(Study::Coverage, f, &flags, Some("5")).unwrap();
        assert_eq!((c.n_agents, c.seed), (vec![10, 30], 4));
        assert_eq!(c.solver, ["rsp:8", "myopic"]);
        let (c, _) = RunConfig::resolve(Study::Coverage, file("{}"), &FlagConfig::default(), Some("5")).unwrap();
        assert_eq!(c.seed, 5);
    }

    #[test]
    fn gamma_rewrites_adaptive_policies_only() {
        let flags = FlagConfig {
            solvers: vec!["rsp:global:0.1".into(), "rrsp:local:0.1:0.3".into(), "rsp:4".into()],
            gamma: Some(0.02),
            ..Default::default()
        };
        let (c, _) = RunConfig::resolve(Study::Probsense, FileConfig::default(), &flags, None).unwrap();
        assert_eq!(c.solver, ["rsp:global:0.02", "rrsp:local:0.02:0.3", "rsp:4"]);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = |study, f: FileConfig, flags: FlagConfig, env: Option<&str>| {
            matches!(RunConfig::resolve(study, f, &flags, env), Err(CliError::Config(_)))
        };
        assert!(bad(Study::Coverage, file(r#"{"family":"track"}"#), FlagConfig::default(), None));
        assert!(bad(Study::Coverage, file(r#"{"solver":"rsp"}"#), FlagConfig::default(), None));
        assert!(bad(Study::Coverage, file(r#"{"trials":0}"#), FlagConfig::default(), None));
        assert!(bad(Study::Coverage, FileConfig::default(), FlagConfig::default(), Some("x")));
        let auction = FlagConfig {
            solvers: vec!["auction:global".into()],
            ..Default::default()
        };
        assert!(bad(Study::Track, FileConfig::default(), auction, None));
        assert!(serde_json::from_str::<FileConfig>(r#"{"agents":3}"#).is_err());
    }
}
