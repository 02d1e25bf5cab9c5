//! Grid-world multi-target tracking.
//!
//! Targets follow a uniform five-point random walk (stay or one of four
//! moves, with off-grid moves becoming stay). Robots measure the range to
//! every target with noise that grows with distance, and the team shares one
//! histogram filter per target. Planning maximizes a sampled estimate of the
//! sum over the horizon of the mutual information between each target's
//! position and the planned observations.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::exec::Execution;
use crate::geom::Point;
use crate::redundancy::{capacities, capacity_graph, RedundancyGraph};
use crate::rng::{derive, label, stream};
use crate::setfun::{GroundElement, SetObjective, SimplePartitionMatroid};
use crate::solvers::{solve, SolveContext, SolverSpec};

pub const N_MOVES: usize = 5;

/// Moves in action-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Stay,
    North,
    South,
    East,
    West,
}

impl Move {
    pub const ALL: [Move; N_MOVES] = [Move::Stay, Move::North, Move::South, Move::East, Move::West];

    fn delta(self) -> (i64, i64) {
        match self {
            Move::Stay => (0, 0),
            Move::North => (0, 1),
            Move::South => (0, -1),
            Move::East => (1, 0),
            Move::West => (-1, 0),
        }
    }
}

/// Four-connected lattice. Cells are indexed row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWorld {
    width: usize,
    height: usize,
}

/// `round(sqrt(12.5 n))`.
pub fn side_for_robots(n: usize) -> usize {
    (12.5 * n as f64).sqrt().round() as usize
}

impl GridWorld {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return invalid_arg("grid dimensions must be positive");
        }
        Ok(GridWorld { width, height })
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(side, side)
    }

    /// Square world sized for a team of `n` robots.
    pub fn for_robots(n: usize) -> Result<Self> {
        let side = side_for_robots(n);
        if side < 2 {
            return invalid_arg(format!("{n} robots give a grid side of {side}; need at least 2"));
        }
        Self::square(side)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn center(&self, cell: usize) -> Point {
        let (x, y) = self.coords(cell);
        Point::new(x as f64, y as f64)
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.center(a).dist(&self.center(b))
    }

    /// Apply move `mv`; moves that leave the grid become stay.
    pub fn step(&self, cell: usize, mv: Move) -> usize {
        let (x, y) = self.coords(cell);
        let (dx, dy) = mv.delta();
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            cell
        } else {
            self.cell(nx as usize, ny as usize)
        }
    }

    fn step_index(&self, cell: usize, mv: usize) -> usize {
        self.step(cell, Move::ALL[mv])
    }
}

pub fn target_step<R: Rng + ?Sized>(cell: usize, world: &GridWorld, rng: &mut R) -> usize {
    world.step_index(cell, rng.random_range(0..N_MOVES))
}

pub const RANGE_CAP: f64 = 20.0;

/// Mean `min(d, 20)` and variance `0.25 + 0.5 mean^2` of a range reading.
pub fn range_mean_var(d: f64) -> (f64, f64) {
    let m = d.min(RANGE_CAP);
    (m, 0.25 + 0.5 * m * m)
}

pub fn range_measurement<R: Rng + ?Sized>(world: &GridWorld, robot: usize, target: usize, rng: &mut R) -> f64 {
    let (m, v) = range_mean_var(world.distance(robot, target));
    let e: f64 = StandardNormal.sample(rng);
    m + v.sqrt() * e
}

/// Gaussian log-density up to a constant.
fn log_lik(z: f64, mean: f64, var: f64) -> f64 {
    let r = z - mean;
    -0.5 * var.ln() - r * r / (2.0 * var)
}

/// Histogram filter over grid cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFilter {
    probs: Vec<f64>,
    sparse_threshold: f64,
    resets: usize,
}

impl TargetFilter {
    pub fn point_mass(world: &GridWorld, cell: usize, sparse_threshold: f64) -> Self {
        let mut probs = vec![0.0; world.n_cells()];
        probs[cell] = 1.0;
        TargetFilter {
            probs,
            sparse_threshold,
            resets: 0,
        }
    }

    pub fn uniform(world: &GridWorld, sparse_threshold: f64) -> Self {
        let n = world.n_cells();
        TargetFilter {
            probs: vec![1.0 / n as f64; n],
            sparse_threshold,
            resets: 0,
        }
    }

    pub fn from_probs(probs: Vec<f64>, sparse_threshold: f64) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return invalid_arg("filter probabilities must be finite and non-negative");
        }
        let total: f64 = probs.iter().sum();
        if !(total > 0.0) {
            return invalid_arg("filter has no mass");
        }
        Ok(TargetFilter {
            probs: probs.into_iter().map(|p| p / total).collect(),
            sparse_threshold,
            resets: 0,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Number of updates that underflowed and fell back to the prior.
    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.probs.len()).filter(|&c| self.probs[c] > 0.0).collect()
    }

    /// Entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    pub fn mean(&self, world: &GridWorld) -> Point {
        let (mut x, mut y) = (0.0, 0.0);
        for (c, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                let q = world.center(c);
                x += p * q.x;
                y += p * q.y;
            }
        }
        Point::new(x, y)
    }

    pub fn predict(&mut self, world: &GridWorld) {
        let mut next = vec![0.0; self.probs.len()];
        for (c, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                for mv in 0..N_MOVES {
                    next[world.step_index(c, mv)] += p / N_MOVES as f64;
                }
            }
        }
        self.probs = next;
    }

    /// Bayes update with range readings `(robot cell, z)`. Returns true if the
    /// posterior underflowed and the prior was kept.
    pub fn update(&mut self, world: &GridWorld, readings: &[(usize, f64)]) -> bool {
        let support = self.support();
        let logs: Vec<f64> = support
            .iter()
            .map(|&c| {
                readings.iter().fold(self.probs[c].ln(), |acc, &(r, z)| {
                    let (m, v) = range_mean_var(world.distance(r, c));
                    acc + log_lik(z, m, v)
                })
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            self.resets += 1;
            return true;
        }
        for (&c, w) in support.iter().zip(weights) {
            self.probs[c] = w / total;
        }
        self.sparsify();
        false
    }

    fn sparsify(&mut self) {
        let t = self.sparse_threshold;
        if t <= 0.0 || !self.probs.iter().any(|&p| p >= t) {
            return;
        }
        for p in &mut self.probs {
            if *p < t {
                *p = 0.0;
            }
        }
        let total: f64 = self.probs.iter().sum();
        self.probs.iter_mut().for_each(|p| *p /= total);
    }
}

pub fn filter_predict(filter: &TargetFilter, world: &GridWorld) -> TargetFilter {
    let mut f = filter.clone();
    f.predict(world);
    f
}

/// Returns the posterior and whether it fell back to the prior.
pub fn filter_update(filter: &TargetFilter, world: &GridWorld, robot: usize, z: f64) -> (TargetFilter, bool) {
    let mut f = filter.clone();
    let reset = f.update(world, &[(robot, z)]);
    (f, reset)
}

pub fn filter_entropy(filter: &TargetFilter) -> f64 {
    filter.entropy()
}

fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&q| q > 0.0).map(|&q| q * q.log2()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanningParams {
    /// Monte-Carlo samples per target.
    pub n_samples: usize,
    /// Planning horizon in steps, 1 or 2.
    pub horizon: usize,
    /// Robots ignore targets whose mean is farther than this when scoring
    /// their own candidates.
    pub local_target_range: Option<f64>,
}

impl Default for PlanningParams {
    fn default() -> Self {
        PlanningParams {
            n_samples: 50,
            horizon: 2,
            local_target_range: None,
        }
    }
}

#[derive(Clone, Debug)]
struct Window {
    cells: Vec<usize>,
    pts: Vec<Point>,
}

/// Precomputed planning data for one target.
#[derive(Clone, Debug)]
struct TargetPlan {
    /// `windows[i]`: cells reachable at step `i + 1`.
    windows: Vec<Window>,
    /// Random-walk transitions from window `i` into window `i + 1`.
    trans: Vec<Vec<[u32; N_MOVES]>>,
    pred1: Vec<f64>,
    log_pred1: Vec<f64>,
    /// Entropy without new observations, per step.
    h_pred: Vec<f64>,
    /// Sampled true position per `(sample, step)`.
    truth: Vec<Point>,
    /// Standard normal noise per `(sample, robot, step)`.
    noise: Vec<f64>,
    mean: Point,
}

/// Range sensor placed at one cell, evaluated over a window.
struct Sensor {
    mean: Vec<f64>,
    half_ln_var: Vec<f64>,
    inv_2var: Vec<f64>,
}

impl Sensor {
    fn new(at: Point, w: &Window) -> Self {
        let mut s = Sensor {
            mean: Vec::with_capacity(w.pts.len()),
            half_ln_var: Vec::with_capacity(w.pts.len()),
            inv_2var: Vec::with_capacity(w.pts.len()),
        };
        for q in &w.pts {
            let (m, v) = range_mean_var(at.dist(q));
            s.mean.push(m);
            s.half_ln_var.push(0.5 * v.ln());
            s.inv_2var.push(1.0 / (2.0 * v));
        }
        s
    }

    /// `base + log p(z | cell)` into `out`.
    fn add_into(&self, base: &[f64], z: f64, out: &mut [f64]) {
        for c in 0..base.len() {
            let r = z - self.mean[c];
            out[c] = base[c] - self.half_ln_var[c] - r * r * self.inv_2var[c];
        }
    }
}

/// Entropy (bits) of `prior * exp(ll)` after normalization. Writes the
/// normalized posterior into `post` when given.
fn weighted_entropy(prior: &[f64], log_prior: &[f64], ll: &[f64], mut post: Option<&mut [f64]>) -> f64 {
    let top = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut s = 0.0;
    for c in 0..prior.len() {
        let e = ll[c] - top;
        let w = prior[c] * e.exp();
        if w > 0.0 {
            z += w;
            s += w * (log_prior[c] + e);
        }
        if let Some(p) = post.as_deref_mut() {
            p[c] = w;
        }
    }
    if let Some(p) = post {
        p.iter_mut().for_each(|w| *w /= z);
    }
    (z.ln() - s / z) / std::f64::consts::LN_2
}

fn transition(trans: &[[u32; N_MOVES]], from: &[f64], to: &mut [f64], log_to: &mut [f64]) {
    to.iter_mut().for_each(|p| *p = 0.0);
    for (c, &p) in from.iter().enumerate() {
        let share = p / N_MOVES as f64;
        for &d in &trans[c] {
            to[d as usize] += share;
        }
    }
    for (l, &p) in log_to.iter_mut().zip(to.iter()) {
        *l = p.ln();
    }
}

#[derive(Clone, Debug)]
struct TargetState {
    /// Accumulated log-likelihood per step, `[sample * |window| + cell]`.
    ll: Vec<Vec<f64>>,
    /// Posterior entropy per `(sample, step)`.
    h: Vec<f64>,
    contribution: f64,
}

#[derive(Clone, Debug)]
pub struct TrackingState {
    targets: Vec<TargetState>,
}

/// Sampled mutual-information objective for one planning step. The ground
/// set is `(robot, action sequence)`; action `a` of a two-step horizon is
/// the move pair `(a / 5, a % 5)`.
///
/// Samples and noise are fixed at construction from `handle`, so every
/// evaluation shares the same random numbers.
#[derive(Debug)]
pub struct TrackingObjective {
    world: GridWorld,
    robots: Vec<usize>,
    targets: Vec<TargetPlan>,
    target_ids: Vec<usize>,
    params: PlanningParams,
    evals: AtomicU64,
}

impl Clone for TrackingObjective {
    fn clone(&self) -> Self {
        TrackingObjective {
            world: self.world,
            robots: self.robots.clone(),
            targets: self.targets.clone(),
            target_ids: self.target_ids.clone(),
            params: self.params,
            evals: AtomicU64::new(self.evals.load(Ordering::Relaxed)),
        }
    }
}

impl TrackingObjective {
    pub fn new(
        world: GridWorld,
        robots: &[usize],
        filters: &[TargetFilter],
        params: PlanningParams,
        handle: u64,
    ) -> Result<Self> {
        if params.n_samples < 1 {
            return invalid_arg("at least one Monte-Carlo sample is required");
        }
        if !(1..=2).contains(&params.horizon) {
            return invalid_arg(format!("horizon must be 1 or 2, got {}", params.horizon));
        }
        if robots.iter().any(|&r| r >= world.n_cells()) {
            return invalid_arg("robot cell outside the grid");
        }
        if filters.iter().any(|f| f.probs.len() != world.n_cells()) {
            return invalid_arg("filter size does not match the grid");
        }
        let targets = filters
            .iter()
            .enumerate()
            .map(|(k, f)| plan_target(&world, robots.len(), f, &params, derive(handle, &[k as u64])))
            .collect();
        Ok(TrackingObjective {
            world,
            robots: robots.to_vec(),
            targets,
            target_ids: (0..filters.len()).collect(),
            params,
            evals: AtomicU64::new(0),
        })
    }

    /// The same objective restricted to target `k`, sharing its samples.
    pub fn component(&self, k: usize) -> TrackingObjective {
        TrackingObjective {
            world: self.world,
            robots: self.robots.clone(),
            targets: vec![self.targets[k].clone()],
            target_ids: vec![self.target_ids[k]],
            params: self.params,
            evals: AtomicU64::new(0),
        }
    }

    pub fn components(&self) -> Vec<TrackingObjective> {
        (0..self.targets.len()).map(|k| self.component(k)).collect()
    }

    pub fn n_actions(&self) -> usize {
        N_MOVES.pow(self.params.horizon as u32)
    }

    pub fn matroid(&self) -> SimplePartitionMatroid {
        SimplePartitionMatroid::uniform(self.robots.len(), self.n_actions()).expect("non-empty blocks")
    }

    /// Moves encoded by action index `a`.
    pub fn decode(&self, a: usize) -> Vec<Move> {
        let mut out = vec![Move::Stay; self.params.horizon];
        let mut rest = a;
        for slot in out.iter_mut().rev() {
            *slot = Move::ALL[rest % N_MOVES];
            rest /= N_MOVES;
        }
        out
    }

    /// Robot cells after each planned move.
    fn path(&self, robot: usize, a: usize) -> Vec<usize> {
        let mut cell = self.robots[robot];
        self.decode(a)
            .into_iter()
            .map(|mv| {
                cell = self.world.step(cell, mv);
                cell
            })
            .collect()
    }

    pub fn robot_positions(&self) -> Vec<Point> {
        self.robots.iter().map(|&c| self.world.center(c)).collect()
    }

    /// Gain evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    fn z(&self, plan: &TargetPlan, s: usize, robot: usize, step: usize, at: Point) -> f64 {
        let h = self.params.horizon;
        let (m, v) = range_mean_var(at.dist(&plan.truth[s * h + step]));
        m + v.sqrt() * plan.noise[(s * self.robots.len() + robot) * h + step]
    }

    fn contribution(&self, plan: &TargetPlan, h: &[f64]) -> f64 {
        let hz = self.params.horizon;
        let ns = self.params.n_samples as f64;
        let mut total = 0.0;
        for i in 0..hz {
            let mean: f64 = (0..self.params.n_samples).map(|s| h[s * hz + i]).sum::<f64>() / ns;
            total += plan.h_pred[i] - mean;
        }
        total.max(0.0)
    }

    fn in_scope(&self, robot: usize, k: usize) -> bool {
        match self.params.local_target_range {
            Some(r) => self.world.center(self.robots[robot]).dist(&self.targets[k].mean) <= r,
            None => true,
        }
    }

    /// New contribution of target `k` for every action of `robot`.
    fn target_candidates(&self, ts: &TargetState, k: usize, robot: usize, n_actions: usize) -> Vec<f64> {
        let plan = &self.targets[k];
        let hz = self.params.horizon;
        let ns = self.params.n_samples;
        let w1 = plan.windows[0].cells.len();
        let mut out = vec![0.0; n_actions];
        let mut seen1: Vec<(usize, usize)> = Vec::new();
        let mut ll = vec![0.0; w1];
        let mut h = ts.h.clone();
        for a1 in 0..N_MOVES {
            let p1 = self.world.step_index(self.robots[robot], a1);
            if let Some(&(_, prev)) = seen1.iter().find(|(c, _)| *c == p1) {
                for a2 in 0..n_actions / N_MOVES {
                    out[a1 * (n_actions / N_MOVES) + a2] = out[prev * (n_actions / N_MOVES) + a2];
                }
                continue;
            }
            seen1.push((p1, a1));
            let at1 = self.world.center(p1);
            let sensor1 = Sensor::new(at1, &plan.windows[0]);
            if hz == 1 {
                for s in 0..ns {
                    sensor1.add_into(&ts.ll[0][s * w1..(s + 1) * w1], self.z(plan, s, robot, 0, at1), &mut ll);
                    h[s] = weighted_entropy(&plan.pred1, &plan.log_pred1, &ll, None);
                }
                out[a1] = self.contribution(plan, &h);
                continue;
            }
            let w2 = plan.windows[1].cells.len();
            let mut prior2 = vec![0.0; ns * w2];
            let mut log_prior2 = vec![0.0; ns * w2];
            let mut post = vec![0.0; w1];
            for s in 0..ns {
                sensor1.add_into(&ts.ll[0][s * w1..(s + 1) * w1], self.z(plan, s, robot, 0, at1), &mut ll);
                h[s * 2] = weighted_entropy(&plan.pred1, &plan.log_pred1, &ll, Some(&mut post));
                transition(
                    &plan.trans[0],
                    &post,
                    &mut prior2[s * w2..(s + 1) * w2],
                    &mut log_prior2[s * w2..(s + 1) * w2],
                );
            }
            let mut seen2: Vec<(usize, f64)> = Vec::new();
            let mut ll2 = vec![0.0; w2];
            for a2 in 0..N_MOVES {
                let p2 = self.world.step_index(p1, a2);
                if let Some(&(_, v)) = seen2.iter().find(|(c, _)| *c == p2) {
                    out[a1 * N_MOVES + a2] = v;
                    continue;
                }
                let at2 = self.world.center(p2);
                let sensor2 = Sensor::new(at2, &plan.windows[1]);
                for s in 0..ns {
                    sensor2.add_into(&ts.ll[1][s * w2..(s + 1) * w2], self.z(plan, s, robot, 1, at2), &mut ll2);
                    let r = s * w2..(s + 1) * w2;
                    h[s * 2 + 1] = weighted_entropy(&prior2[r.clone()], &log_prior2[r], &ll2, None);
                }
                let v = self.contribution(plan, &h);
                seen2.push((p2, v));
                out[a1 * N_MOVES + a2] = v;
            }
        }
        out
    }
}

fn dilate(world: &GridWorld, cells: &[usize]) -> Vec<usize> {
    let mut mark = vec![false; world.n_cells()];
    for &c in cells {
        for mv in 0..N_MOVES {
            mark[world.step_index(c, mv)] = true;
        }
    }
    (0..world.n_cells()).filter(|&c| mark[c]).collect()
}

fn window(world: &GridWorld, cells: Vec<usize>) -> Window {
    let pts = cells.iter().map(|&c| world.center(c)).collect();
    Window { cells, pts }
}

fn transitions(world: &GridWorld, from: &[usize], to: &[usize]) -> Vec<[u32; N_MOVES]> {
    let mut index = vec![u32::MAX; world.n_cells()];
    for (i, &c) in to.iter().enumerate() {
        index[c] = i as u32;
    }
    from.iter()
        .map(|&c| std::array::from_fn(|mv| index[world.step_index(c, mv)]))
        .collect()
}

fn plan_target(world: &GridWorld, n_robots: usize, f: &TargetFilter, params: &PlanningParams, seed: u64) -> TargetPlan {
    let support = f.support();
    let w1 = dilate(world, &support);
    let mut windows = vec![window(world, w1)];
    let mut trans = Vec::new();
    let t0 = transitions(world, &support, &windows[0].cells);
    let mut pred1 = vec![0.0; windows[0].cells.len()];
    let mut log_pred1 = vec![0.0; pred1.len()];
    let mass: Vec<f64> = support.iter().map(|&c| f.probs[c]).collect();
    transition(&t0, &mass, &mut pred1, &mut log_pred1);
    let mut h_pred = vec![entropy_bits(&pred1)];
    if params.horizon == 2 {
        let w2 = dilate(world, &windows[0].cells);
        trans.push(transitions(world, &windows[0].cells, &w2));
        let mut pred2 = vec![0.0; w2.len()];
        let mut scratch = vec![0.0; w2.len()];
        transition(&trans[0], &pred1, &mut pred2, &mut scratch);
        h_pred.push(entropy_bits(&pred2));
        windows.push(window(world, w2));
    }
    let ns = params.n_samples;
    let hz = params.horizon;
    let mut truth = Vec::with_capacity(ns * hz);
    let mut noise = Vec::with_capacity(ns * n_robots * hz);
    let cdf: Vec<f64> = mass
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    for s in 0..ns {
        let mut rng = stream(seed, &[s as u64]);
        let u = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
        let mut cell = support[cdf.partition_point(|&c| c <= u).min(support.len() - 1)];
        for _ in 0..hz {
            cell = target_step(cell, world, &mut rng);
            truth.push(world.center(cell));
        }
        for _ in 0..n_robots * hz {
            noise.push(StandardNormal.sample(&mut rng));
        }
    }
    TargetPlan {
        windows,
        trans,
        pred1,
        log_pred1,
        h_pred,
        truth,
        noise,
        mean: f.mean(world),
    }
}

impl SetObjective for TrackingObjective {
    type State = TrackingState;

    fn empty_state(&self) -> TrackingState {
        let ns = self.params.n_samples;
        TrackingState {
            targets: self
                .targets
                .iter()
                .map(|p| TargetState {
                    ll: p.windows.iter().map(|w| vec![0.0; ns * w.cells.len()]).collect(),
                    h: (0..ns).flat_map(|_| p.h_pred.iter().copied()).collect(),
                    contribution: 0.0,
                })
                .collect(),
        }
    }

    fn insert(&self, state: &mut TrackingState, x: GroundElement) {
        let path = self.path(x.agent, x.action);
        let ns = self.params.n_samples;
        let hz = self.params.horizon;
        for (plan, ts) in self.targets.iter().zip(&mut state.targets) {
            for (i, &cell) in path.iter().enumerate() {
                let at = self.world.center(cell);
                let sensor = Sensor::new(at, &plan.windows[i]);
                let w = plan.windows[i].cells.len();
                let mut row = vec![0.0; w];
                for s in 0..ns {
                    let z = self.z(plan, s, x.agent, i, at);
                    sensor.add_into(&ts.ll[i][s * w..(s + 1) * w], z, &mut row);
                    ts.ll[i][s * w..(s + 1) * w].copy_from_slice(&row);
                }
            }
            let w1 = plan.windows[0].cells.len();
            let mut post = vec![0.0; w1];
            for s in 0..ns {
                let ll1 = &ts.ll[0][s * w1..(s + 1) * w1];
                if hz == 1 {
                    ts.h[s] = weighted_entropy(&plan.pred1, &plan.log_pred1, ll1, None);
                    continue;
                }
                ts.h[s * 2] = weighted_entropy(&plan.pred1, &plan.log_pred1, ll1, Some(&mut post));
                let w2 = plan.windows[1].cells.len();
                let mut prior2 = vec![0.0; w2];
                let mut log_prior2 = vec![0.0; w2];
                transition(&plan.trans[0], &post, &mut prior2, &mut log_prior2);
                ts.h[s * 2 + 1] = weighted_entropy(&prior2, &log_prior2, &ts.ll[1][s * w2..(s + 1) * w2], None);
            }
            ts.contribution = self.contribution(plan, &ts.h);
        }
    }

    fn value(&self, state: &TrackingState) -> f64 {
        state.targets.iter().map(|t| t.contribution).sum()
    }

    fn gain(&self, state: &TrackingState, x: GroundElement) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        let mut next = state.clone();
        self.insert(&mut next, x);
        self.value(&next) - self.value(state)
    }

    fn local_gains(&self, state: &TrackingState, agent: usize, n_actions: usize) -> Vec<f64> {
        self.evals.fetch_add(n_actions as u64, Ordering::Relaxed);
        let mut gains = vec![0.0; n_actions];
        for (k, ts) in state.targets.iter().enumerate() {
            if !self.in_scope(agent, k) {
                continue;
            }
            for (g, v) in gains.iter_mut().zip(self.target_candidates(ts, k, agent, n_actions)) {
                *g += v - ts.contribution;
            }
        }
        gains
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}

/// Fixed setup of a tracking experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingScenario {
    pub world: GridWorld,
    pub robots: Vec<usize>,
    pub targets: Vec<usize>,
    pub horizon: usize,
    pub trial_length: usize,
    pub burn_in: usize,
    pub n_samples: usize,
    pub sparse_threshold: f64,
    /// Target range used by range-limited planners.
    pub local_target_range: f64,
    pub seed: u64,
}

/// Sparse filters are used for teams of 16 or more.
pub fn default_sparse_threshold(n_robots: usize) -> f64 {
    if n_robots >= 16 {
        1e-3
    } else {
        0.0
    }
}

impl TrackingScenario {
    /// Uniformly random robot and target cells, one target per robot.
    pub fn random(n_robots: usize, seed: u64) -> Result<Self> {
        if n_robots == 0 {
            return invalid_arg("need at least one robot");
        }
        let world = GridWorld::for_robots(n_robots)?;
        let mut rng = stream(seed, &[label("tracking-init")]);
        let robots = (0..n_robots).map(|_| rng.random_range(0..world.n_cells())).collect();
        let targets = (0..n_robots).map(|_| rng.random_range(0..world.n_cells())).collect();
        Ok(TrackingScenario {
            world,
            robots,
            targets,
            horizon: 2,
            trial_length: 100,
            burn_in: 20,
            n_samples: 50,
            sparse_threshold: default_sparse_threshold(n_robots),
            local_target_range: 12.0,
            seed,
        })
    }

    pub fn n_robots(&self) -> usize {
        self.robots.len()
    }

    pub fn initial_filters(&self) -> Vec<TargetFilter> {
        self.targets
            .iter()
            .map(|&c| TargetFilter::point_mass(&self.world, c, self.sparse_threshold))
            .collect()
    }

    fn params_for(&self, spec: &SolverSpec) -> PlanningParams {
        PlanningParams {
            n_samples: self.n_samples,
            horizon: self.horizon,
            local_target_range: matches!(spec, SolverSpec::Rrsp(..)).then_some(self.local_target_range),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub mean_entropy_bits: f64,
    pub objective: f64,
    pub planning_evals: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub steps: Vec<StepRecord>,
    /// Mean entropy over the steps after burn-in.
    pub summary_entropy: f64,
    pub filter_resets: usize,
}

/// Capacity weights of a tracking objective.
pub fn tracking_weights(f: &TrackingObjective, exec: Execution) -> RedundancyGraph {
    capacity_graph(&capacities(&f.components(), &f.matroid(), exec))
}

/// Simulate one trial: plan, move robots, move targets, measure, filter.
pub fn run_tracking_trial(sc: &TrackingScenario, spec: &SolverSpec, exec: Execution) -> Result<TrialRecord> {
    if spec.needs_comm_graph() {
        return Err(Error::InvalidArgument(format!("solver {spec} is not supported for tracking")));
    }
    let world = sc.world;
    let mut robots = sc.robots.clone();
    let mut targets = sc.targets.clone();
    let mut filters = sc.initial_filters();
    let mut steps = Vec::with_capacity(sc.trial_length);
    for step in 1..=sc.trial_length {
        let handle = derive(sc.seed, &[label("noise"), step as u64]);
        let f = TrackingObjective::new(world, &robots, &filters, sc.params_for(spec), handle)?;
        let m = f.matroid();
        let positions = f.robot_positions();
        let weights = spec.needs_weights().then(|| tracking_weights(&f, exec));
        let ctx = SolveContext {
            positions: Some(&positions),
            weights: weights.as_ref(),
            comm: None,
            exec,
        };
        let mut rng = stream(sc.seed, &[label("plan"), step as u64]);
        let plan = solve(spec, &f, &m, &ctx, &mut rng)?;
        for (j, r) in robots.iter_mut().enumerate() {
            let a = plan.selection.action_of(j).expect("every robot is assigned");
            *r = world.step(*r, f.decode(a)[0]);
        }
        let mut trng = stream(sc.seed, &[label("targets"), step as u64]);
        for t in targets.iter_mut() {
            *t = target_step(*t, &world, &mut trng);
        }
        let mut mrng = stream(sc.seed, &[label("measure"), step as u64]);
        for (filter, &t) in filters.iter_mut().zip(&targets) {
            let readings: Vec<(usize, f64)> = robots
                .iter()
                .map(|&r| (r, range_measurement(&world, r, t, &mut mrng)))
                .collect();
            filter.predict(&world);
            filter.update(&world, &readings);
        }
        let mean_entropy = filters.iter().map(TargetFilter::entropy).sum::<f64>() / filters.len() as f64;
        steps.push(StepRecord {
            step,
            mean_entropy_bits: mean_entropy,
            objective: plan.value,
            planning_evals: f.evaluations(),
        });
    }
    let kept: Vec<f64> = steps.iter().filter(|s| s.step > sc.burn_in).map(|s| s.mean_entropy_bits).collect();
    let summary_entropy = kept.iter().sum::<f64>() / kept.len().max(1) as f64;
    Ok(TrialRecord {
        steps,
        summary_entropy,
        filter_resets: filters.iter().map(TargetFilter::resets).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::sequential_greedy;
    use proptest::prelude::*;

    fn params(n_samples: usize, horizon: usize) -> PlanningParams {
        PlanningParams {
            n_samples,
            horizon,
            local_target_range: None,
        }
    }

    #[test]
    fn corner_walk_distribution() {
        let w = GridWorld::square(3).unwrap();
        // from (0, 0): stay, south and west stay put; north -> 3, east -> 1
        let expected = [(0, 0.6), (1, 0.2), (3, 0.2)];
        let mut rng = stream(1, &[]);
        let trials = 20000;
        let mut counts = [0usize; 9];
        for _ in 0..trials {
            counts[target_step(0, &w, &mut rng)] += 1;
        }
        let chi2: f64 = expected
            .iter()
            .map(|&(c, p)| {
                let e = p * trials as f64;
                (counts[c] as f64 - e).powi(2) / e
            })
            .sum();
        assert_eq!(counts.iter().sum::<usize>(), expected.iter().map(|&(c, _)| counts[c]).sum::<usize>());
        // 99.9% quantile of chi-square with 2 degrees of freedom
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }

    #[test]
    fn interior_walk_is_uniform() {
        let w = GridWorld::square(5).unwrap();
        let c = w.cell(2, 2);
        let mut rng = stream(2, &[]);
        let mut counts = std::collections::BTreeMap::new();
        for _ in 0..25000 {
            *counts.entry(target_step(c, &w, &mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 5);
        let chi2: f64 = counts.values().map(|&k| (k as f64 - 5000.0).powi(2) / 5000.0).sum();
        // 99.9% quantile with 4 degrees of freedom
        assert!(chi2 < 18.5, "chi2 = {chi2}");
    }

    #[test]
    fn measurement_noise() {
        assert_eq!(range_mean_var(0.0), (0.0, 0.25));
        assert_eq!(range_mean_var(100.0), (20.0, 200.25));
        let w = GridWorld::new(120, 1).unwrap();
        let mut rng = stream(3, &[]);
        let zs: Vec<f64> = (0..20000).map(|_| range_measurement(&w, 0, 100, &mut rng)).collect();
        let s = crate::stats::summarize(&zs);
        assert!((s.mean - 20.0).abs() < 4.0 * s.stderr);
        assert!((s.std * s.std / 200.25 - 1.0).abs() < 0.05);
    }

    #[test]
    fn predict_spreads_point_mass() {
        let w = GridWorld::square(3).unwrap();
        let mut f = TargetFilter::point_mass(&w, 4, 0.0);
        assert_eq!(f.entropy(), 0.0);
        f.predict(&w);
        for c in [1, 3, 4, 5, 7] {
            assert!((f.probs()[c] - 0.2).abs() < 1e-15);
        }
        assert_eq!(f.support(), vec![1, 3, 4, 5, 7]);
        assert!((f.entropy() - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn update_concentrates_near_robot() {
        let w = GridWorld::square(10).unwrap();
        let mut f = TargetFilter::uniform(&w, 0.0);
        assert!((f.entropy() - 100f64.log2()).abs() < 1e-12);
        let reset = f.update(&w, &[(0, 0.0), (0, 0.1)]);
        assert!(!reset);
        assert!((f.mass() - 1.0).abs() < 1e-12);
        let best = (0..100).max_by(|&a, &b| f.probs()[a].total_cmp(&f.probs()[b])).unwrap();
        assert_eq!(best, 0);
        assert!(f.entropy() < 100f64.log2() - 1.0);
    }

    #[test]
    fn underflow_keeps_prior() {
        let w = GridWorld::new(2, 1).unwrap();
        let mut f = TargetFilter::uniform(&w, 0.0);
        assert!(f.update(&w, &[(0, f64::INFINITY)]));
        assert_eq!(f.resets(), 1);
        assert_eq!(f.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn sparse_threshold_drops_small_cells() {
        let f = TargetFilter::from_probs(vec![0.9, 0.0995, 0.0005], 1e-3).unwrap();
        let w = GridWorld::new(3, 1).unwrap();
        let mut g = f.clone();
        g.update(&w, &[]);
        assert_eq!(g.probs()[2], 0.0);
        assert!((g.mass() - 1.0).abs() < 1e-15);
    }

    /// Differential entropy in bits of an equal mixture of two Gaussians,
    /// by the trapezoid rule.
    fn mixture_entropy(m: [f64; 2], v: [f64; 2]) -> f64 {
        let pdf = |z: f64| {
            (0..2)
                .map(|i| 0.5 * (-(z - m[i]).powi(2) / (2.0 * v[i])).exp() / (2.0 * std::f64::consts::PI * v[i]).sqrt())
                .sum::<f64>()
        };
        let (lo, hi, n) = (-12.0, 14.0, 200_000);
        let dz = (hi - lo) / n as f64;
        (0..=n)
            .map(|k| {
                let p = pdf(lo + k as f64 * dz);
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                if p > 0.0 {
                    -w * p * p.log2() * dz
                } else {
                    0.0
                }
            })
            .sum()
    }

    #[test]
    fn two_cell_information_matches_quadrature() {
        let w = GridWorld::new(2, 1).unwrap();
        let f = TrackingObjective::new(w, &[0], &[TargetFilter::uniform(&w, 0.0)], params(20000, 1), 5).unwrap();
        let g = f.gain(&f.empty_state(), GroundElement::new(0, Move::Stay as usize));
        // the predicted belief stays uniform; readings from cell 0 are
        // N(0, 0.25) or N(1, 0.75)
        let h_cond = 0.5 * (0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.25).log2())
            + 0.5 * (0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 0.75).log2());
        let mi = mixture_entropy([0.0, 1.0], [0.25, 0.75]) - h_cond;
        assert!(mi > 0.1);
        assert!((g / mi - 1.0).abs() < 0.02, "sampled {g}, quadrature {mi}");
    }

    #[test]
    fn known_static_target_gives_nothing() {
        let w = GridWorld::new(1, 1).unwrap();
        let f = TrackingObjective::new(w, &[0], &[TargetFilter::point_mass(&w, 0, 0.0)], params(50, 2), 1).unwrap();
        let gains = f.local_gains(&f.empty_state(), 0, f.n_actions());
        assert!(gains.iter().all(|&g| g.abs() < 1e-12));
    }

    fn random_setup(seed: u64, horizon: usize) -> TrackingObjective {
        let w = GridWorld::new(7, 6).unwrap();
        let mut rng = stream(seed, &[]);
        let robots: Vec<usize> = (0..3).map(|_| rng.random_range(0..w.n_cells())).collect();
        let filters: Vec<TargetFilter> = (0..2)
            .map(|_| {
                let mut f = TargetFilter::point_mass(&w, rng.random_range(0..w.n_cells()), 0.0);
                f.predict(&w);
                f.predict(&w);
                f
            })
            .collect();
        TrackingObjective::new(w, &robots, &filters, params(12, horizon), seed).unwrap()
    }

    #[test]
    fn sum_over_targets_is_exact() {
        for seed in 0..6 {
            let f = random_setup(seed, 1 + seed as usize % 2);
            let parts = f.components();
            let mut rng = stream(seed, &[1]);
            for _ in 0..5 {
                let s: Vec<GroundElement> = (0..3)
                    .filter_map(|i| {
                        let a = rng.random_range(0..f.n_actions());
                        rng.random_bool(0.7).then_some(GroundElement::new(i, a))
                    })
                    .collect();
                let whole = f.evaluate(&s);
                let sum: f64 = parts.iter().map(|p| p.evaluate(&s)).sum();
                assert!((whole - sum).abs() < 1e-12, "{whole} vs {sum}");
            }
        }
    }

    #[test]
    fn batched_gains_match_single_evaluations() {
        for seed in 0..4 {
            let f = random_setup(seed, 1 + seed as usize % 2);
            let mut state = f.empty_state();
            f.insert(&mut state, GroundElement::new(1, 2));
            let batched = f.local_gains(&state, 0, f.n_actions());
            for (a, &b) in batched.iter().enumerate() {
                let single = f.gain(&state, GroundElement::new(0, a));
                assert!((single - b).abs() < 1e-12, "action {a}: {single} vs {b}");
            }
        }
    }

    #[test]
    fn decode_actions() {
        let f = random_setup(0, 2);
        assert_eq!(f.n_actions(), 25);
        assert_eq!(f.decode(3 * 5 + 1), vec![Move::East, Move::North]);
        assert_eq!(random_setup(1, 1).decode(4), vec![Move::West]);
    }

    #[test]
    fn planner_moves_toward_target() {
        let w = GridWorld::new(12, 1).unwrap();
        let mut probs = vec![0.0; 12];
        probs[9..12].iter_mut().for_each(|p| *p = 1.0);
        let filter = TargetFilter::from_probs(probs, 0.0).unwrap();
        let f = TrackingObjective::new(w, &[4], &[filter], params(200, 2), 3).unwrap();
        let r = sequential_greedy(&f, &f.matroid(), &[0]).unwrap();
        let a = r.selection.action_of(0).unwrap();
        assert_eq!(f.decode(a), vec![Move::East, Move::East]);
    }

    #[test]
    fn capacity_weights_need_shared_targets() {
        let f = random_setup(2, 1);
        let g = tracking_weights(&f, Execution::Sequential);
        assert_eq!(g.n_agents(), 3);
        assert!(g.total_weight() >= 0.0);
    }

    #[test]
    fn trials_replay_exactly() {
        let mut sc = TrackingScenario::random(4, 11).unwrap();
        sc.trial_length = 6;
        sc.burn_in = 2;
        sc.n_samples = 8;
        for spec in ["myopic", "sequential", "rsp:2", "rrsp:2:6"] {
            let spec: SolverSpec = spec.parse().unwrap();
            let a = run_tracking_trial(&sc, &spec, Execution::Sequential).unwrap();
            assert_eq!(a, run_tracking_trial(&sc, &spec, Execution::Parallel).unwrap());
            assert_eq!(a.steps.len(), 6);
            assert!(a.summary_entropy.is_finite() && a.summary_entropy >= 0.0);
        }
        assert!(run_tracking_trial(&sc, &"auction:global".parse().unwrap(), Execution::Sequential).is_err());
    }

    proptest! {
        #[test]
        fn predict_conserves_mass(w in 1usize..7, h in 1usize..7, cells in proptest::collection::vec(0.0f64..1.0, 36)) {
            let world = GridWorld::new(w, h).unwrap();
            let probs: Vec<f64> = cells[..w * h].iter().map(|p| p + 1e-3).collect();
            let mut f = TargetFilter::from_probs(probs, 0.0).unwrap();
            for _ in 0..3 {
                f.predict(&world);
                prop_assert!((f.mass() - 1.0).abs() < 1e-12);
                prop_assert!(f.entropy() <= ((w * h) as f64).log2() + 1e-12);
            }
        }
    }
}
