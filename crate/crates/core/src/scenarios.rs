//! Seeded generators for the benchmark problem families.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::geom::Point;
use crate::objectives::{AreaCoverageProblem, DetectionModel, ProbCoverageProblem, DEFAULT_GRID_RESOLUTION};
use crate::setfun::SimplePartitionMatroid;
use crate::tracking::TrackingScenario;

pub const ACTIONS_PER_AGENT: usize = 10;
pub const N_EVENTS: usize = 50;

/// Sensor radius `sqrt(2 / (n pi))` and agent radius `2 r_s`.
pub fn area_coverage_radii(n: usize) -> (f64, f64) {
    let r_s = (2.0 / (n as f64 * PI)).sqrt();
    (r_s, 2.0 * r_s)
}

/// Sensor radius `sqrt(0.6 / (n pi))` and agent radius `4 r_s`.
pub fn prob_sensing_radii(n: usize) -> (f64, f64) {
    let r_s = (0.6 / (n as f64 * PI)).sqrt();
    (r_s, 4.0 * r_s)
}

/// Default redundancy budget for adaptive round policies, `0.4 / n`.
pub fn prob_sensing_gamma(n: usize) -> f64 {
    0.4 / n as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Point,
    pub sigma: f64,
}

/// Isotropic Gaussian mixture truncated to the unit square by rejection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<MixtureComponent>,
}

impl Default for GaussianMixture {
    fn default() -> Self {
        let c = |x, y| MixtureComponent {
            weight: 1.0,
            mean: Point::new(x, y),
            sigma: 0.12,
        };
        GaussianMixture {
            components: vec![c(0.25, 0.25), c(0.7, 0.3), c(0.5, 0.8)],
        }
    }
}

impl GaussianMixture {
    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return invalid_arg("mixture needs at least one component");
        }
        for c in &self.components {
            if !(c.weight > 0.0 && c.sigma > 0.0 && c.weight.is_finite() && c.sigma.is_finite()) {
                return invalid_arg("mixture weights and sigmas must be positive");
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        loop {
            let mut u = rng.random::<f64>() * total;
            let comp = self
                .components
                .iter()
                .find(|c| {
                    u -= c.weight;
                    u < 0.0
                })
                .unwrap_or_else(|| self.components.last().expect("non-empty"));
            let n = Normal::new(0.0, comp.sigma).expect("positive sigma");
            let p = Point::new(comp.mean.x + n.sample(rng), comp.mean.y + n.sample(rng));
            if p.in_unit_square() {
                return p;
            }
        }
    }
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R) -> Point {
    Point::new(rng.random(), rng.random())
}

/// `k` points uniform in the disk of radius `r` about `c`. Points may fall
/// outside the unit square; their coverage is clipped by the objective.
fn disk_points<R: Rng + ?Sized>(c: Point, r: f64, k: usize, rng: &mut R) -> Vec<Point> {
    (0..k)
        .map(|_| {
            let rho = r * rng.random::<f64>().sqrt();
            let t = TAU * rng.random::<f64>();
            Point::new(c.x + rho * t.cos(), c.y + rho * t.sin())
        })
        .collect()
}

fn agents_and_actions<R: Rng + ?Sized>(n: usize, r_a: f64, k: usize, rng: &mut R) -> (Vec<Point>, Vec<Vec<Point>>) {
    let centers: Vec<Point> = (0..n).map(|_| uniform_point(rng)).collect();
    let actions = centers.iter().map(|&c| disk_points(c, r_a, k, rng)).collect();
    (centers, actions)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaCoverageParams {
    pub actions_per_agent: usize,
    pub grid_resolution: usize,
}

impl Default for AreaCoverageParams {
    fn default() -> Self {
        AreaCoverageParams {
            actions_per_agent: ACTIONS_PER_AGENT,
            grid_resolution: DEFAULT_GRID_RESOLUTION,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AreaCoverageScenario {
    pub problem: AreaCoverageProblem,
    pub matroid: SimplePartitionMatroid,
    pub positions: Vec<Point>,
    pub r_s: f64,
    pub r_a: f64,
}

pub fn gen_area_coverage<R: Rng + ?Sized>(n: usize, params: &AreaCoverageParams, rng: &mut R) -> Result<AreaCoverageScenario> {
    if n == 0 || params.actions_per_agent == 0 {
        return invalid_arg("need at least one agent and one action per agent");
    }
    let (_, r_a) = area_coverage_radii(n);
    let (positions, _) = agents_and_actions(n, r_a, 0, rng);
    gen_area_coverage_at(positions, params, rng)
}

/// Area coverage with the given agent centers.
pub fn gen_area_coverage_at<R: Rng + ?Sized>(
    positions: Vec<Point>,
    params: &AreaCoverageParams,
    rng: &mut R,
) -> Result<AreaCoverageScenario> {
    if positions.is_empty() || params.actions_per_agent == 0 {
        return invalid_arg("need at least one agent and one action per agent");
    }
    let (r_s, r_a) = area_coverage_radii(positions.len());
    let actions = positions
        .iter()
        .map(|&c| disk_points(c, r_a, params.actions_per_agent, rng))
        .collect();
    let problem = AreaCoverageProblem::new(actions, r_s, params.grid_resolution)?;
    Ok(AreaCoverageScenario {
        matroid: problem.matroid(),
        problem,
        positions,
        r_s,
        r_a,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbSensingParams {
    pub actions_per_agent: usize,
    pub n_events: usize,
    pub mixture: GaussianMixture,
    pub detection: DetectionModel,
}

impl Default for ProbSensingParams {
    fn default() -> Self {
        ProbSensingParams {
            actions_per_agent: ACTIONS_PER_AGENT,
            n_events: N_EVENTS,
            mixture: GaussianMixture::default(),
            detection: DetectionModel::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbSensingScenario {
    pub problem: ProbCoverageProblem,
    pub matroid: SimplePartitionMatroid,
    pub positions: Vec<Point>,
    pub events: Vec<(Point, f64)>,
    pub r_s: f64,
    pub r_a: f64,
    pub gamma: f64,
    /// Default communication range `2 r_a`.
    pub r_c: f64,
}

pub fn gen_prob_sensing<R: Rng + ?Sized>(n: usize, params: &ProbSensingParams, rng: &mut R) -> Result<ProbSensingScenario> {
    if n == 0 || params.actions_per_agent == 0 || params.n_events == 0 {
        return invalid_arg("need at least one agent, action and event");
    }
    params.mixture.validate()?;
    let (r_s, r_a) = prob_sensing_radii(n);
    let value = 1.0 / params.n_events as f64;
    let events: Vec<(Point, f64)> = (0..params.n_events)
        .map(|_| (params.mixture.sample(rng), value))
        .collect();
    let (positions, actions) = agents_and_actions(n, r_a, params.actions_per_agent, rng);
    let problem = ProbCoverageProblem::with_detection(&events, actions, r_s, params.detection)?;
    Ok(ProbSensingScenario {
        matroid: problem.matroid(),
        problem,
        positions,
        events,
        r_s,
        r_a,
        gamma: prob_sensing_gamma(n),
        r_c: 2.0 * r_a,
    })
}

pub fn gen_tracking(n: usize, seed: u64) -> Result<TrackingScenario> {
    TrackingScenario::random(n, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    AreaCoverage,
    ProbSensing,
    Tracking,
}

/// Optional parameter overrides; unset fields keep their defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub grid_resolution: Option<usize>,
    pub actions_per_agent: Option<usize>,
    pub n_events: Option<usize>,
    pub detection_radius_power: Option<f64>,
    pub mixture: Option<GaussianMixture>,
    pub n_samples: Option<usize>,
    pub sparse_threshold: Option<f64>,
    pub horizon: Option<usize>,
    pub trial_length: Option<usize>,
    pub burn_in: Option<usize>,
    /// Replace the generated positions' communication graph with one of
    /// this range (auctions and range-limited planners).
    pub comm_range: Option<f64>,
}

impl Overrides {
    pub fn area_params(&self) -> AreaCoverageParams {
        let d = AreaCoverageParams::default();
        AreaCoverageParams {
            actions_per_agent: self.actions_per_agent.unwrap_or(d.actions_per_agent),
            grid_resolution: self.grid_resolution.unwrap_or(d.grid_resolution),
        }
    }

    pub fn prob_params(&self) -> ProbSensingParams {
        let d = ProbSensingParams::default();
        ProbSensingParams {
            actions_per_agent: self.actions_per_agent.unwrap_or(d.actions_per_agent),
            n_events: self.n_events.unwrap_or(d.n_events),
            mixture: self.mixture.clone().unwrap_or(d.mixture),
            detection: DetectionModel {
                radius_power: self.detection_radius_power.unwrap_or(d.detection.radius_power),
            },
        }
    }

    pub fn apply_tracking(&self, sc: &mut TrackingScenario) {
        if let Some(v) = self.n_samples {
            sc.n_samples = v;
        }
        if let Some(v) = self.sparse_threshold {
            sc.sparse_threshold = v;
        }
        if let Some(v) = self.horizon {
            sc.horizon = v;
        }
        if let Some(v) = self.trial_length {
            sc.trial_length = v;
        }
        if let Some(v) = self.burn_in {
            sc.burn_in = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn radii() {
        let (r_s, r_a) = area_coverage_radii(50);
        assert!((r_s - 0.113).abs() < 5e-4 && (r_a - 0.226).abs() < 5e-4);
        let (r_s, r_a) = prob_sensing_radii(50);
        assert!((r_s - 0.0618).abs() < 5e-5 && (r_a - 0.247).abs() < 5e-4);
        assert!((prob_sensing_gamma(50) - 8e-3).abs() < 1e-15);
        for n in 1..200 {
            let (s, a) = area_coverage_radii(n);
            assert!((s * s * n as f64 * PI - 2.0).abs() < 1e-12 && (a - 2.0 * s).abs() < 1e-12);
            let (s, a) = prob_sensing_radii(n);
            assert!((s * s * n as f64 * PI - 0.6).abs() < 1e-12 && (a - 4.0 * s).abs() < 1e-12);
        }
    }

    #[test]
    fn area_actions_stay_near_agents() {
        let params = AreaCoverageParams {
            grid_resolution: 64,
            ..Default::default()
        };
        let sc = gen_area_coverage(50, &params, &mut stream(1, &[])).unwrap();
        assert_eq!(sc.matroid.blocks(), &[10; 50][..]);
        for (i, c) in sc.positions.iter().enumerate() {
            for p in &sc.problem.centers()[i] {
                assert!(p.dist(c) <= sc.r_a + 1e-12);
            }
        }
    }

    #[test]
    fn prob_sensing_events() {
        let sc = gen_prob_sensing(50, &ProbSensingParams::default(), &mut stream(2, &[])).unwrap();
        assert_eq!(sc.events.len(), 50);
        assert!((sc.events.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sc.events.iter().all(|e| e.0.in_unit_square()));
        assert!((sc.r_c - 2.0 * sc.r_a).abs() < 1e-15);
    }

    #[test]
    fn generators_are_pure() {
        let p = ProbSensingParams::default();
        let a = gen_prob_sensing(20, &p, &mut stream(9, &[])).unwrap();
        let b = gen_prob_sensing(20, &p, &mut stream(9, &[])).unwrap();
        assert_eq!(a.events, b.events);
        assert_eq!(a.positions, b.positions);
        let c = gen_tracking(8, 4).unwrap();
        assert_eq!(c, gen_tracking(8, 4).unwrap());
    }

    #[test]
    fn tracking_grid_sides() {
        assert_eq!(gen_tracking(8, 0).unwrap().world.width(), 10);
        assert_eq!(gen_tracking(96, 0).unwrap().world.width(), 35);
        let sc = gen_tracking(8, 0).unwrap();
        assert!(sc.initial_filters().iter().all(|f| f.entropy() == 0.0));
        assert_eq!(sc.sparse_threshold, 0.0);
        assert_eq!(gen_tracking(16, 0).unwrap().sparse_threshold, 1e-3);
    }
}
