//! Fixtures and randomized oracle batteries on brute-forceable instances.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::exec::Execution;
use crate::objectives::{ProbCoverageProblem, SignFlippedCoverage};
use crate::redundancy::{capacity_weights, deleted_edge_weight, redundancy_graph};
use crate::rng::{stream, Rng as StreamRng};
use crate::setfun::{
    brute_force_optimum, second_derivative, set_gain, GroundElement, Selection, SetObjective,
    SimplePartitionMatroid, DEFAULT_ENUMERATION_CAP,
};
use crate::solvers::{dag_greedy, dsga_plan, sequential_greedy, PlannerDag};
use crate::tracking::{range_mean_var, tracking_weights, GridWorld, PlanningParams, TargetFilter, TrackingObjective};

pub const TOL: f64 = 1e-9;

/// Two agents `a` and `b` with two actions each over unit items P, Q, R:
/// `a1 = {P, Q}`, `a2 = {R}`, `b1 = {P, Q}`, `b2 = {Q, R}`.
pub fn t1() -> (ProbCoverageProblem, SimplePartitionMatroid) {
    let f = ProbCoverageProblem::from_sparse(
        vec![1.0, 1.0, 1.0],
        vec![
            vec![vec![(0, 0.0), (1, 0.0)], vec![(2, 0.0)]],
            vec![vec![(0, 0.0), (1, 0.0)], vec![(1, 0.0), (2, 0.0)]],
        ],
    )
    .expect("valid fixture");
    let m = f.matroid();
    (f, m)
}

/// `n` agents with two actions each; agent `i` covers only its own events.
pub fn disjoint_instance(n: usize) -> ProbCoverageProblem {
    let entries = (0..n)
        .map(|i| vec![vec![(2 * i, 0.0)], vec![(2 * i + 1, 0.5)]])
        .collect();
    ProbCoverageProblem::from_sparse(vec![1.0; 2 * n], entries).expect("valid fixture")
}

/// Random probabilistic coverage with up to `max_agents` agents, up to
/// `max_actions` actions each and up to `max_events` events.
pub fn random_coverage<R: Rng + ?Sized>(
    rng: &mut R,
    max_agents: usize,
    max_actions: usize,
    max_events: usize,
) -> ProbCoverageProblem {
    let n = rng.random_range(1..=max_agents);
    let n_events = rng.random_range(1..=max_events);
    let values = (0..n_events).map(|_| rng.random_range(0.0..2.0)).collect();
    let entries = (0..n)
        .map(|_| {
            (0..rng.random_range(1..=max_actions))
                .map(|_| {
                    (0..n_events)
                        .filter_map(|e| {
                            let q = if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() };
                            rng.random_bool(0.6).then_some((e, q))
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    ProbCoverageProblem::from_sparse(values, entries).expect("valid random instance")
}

/// The sum of `parts`, which must share block sizes, as one instance over
/// the concatenated events.
pub fn sum_instance(parts: &[ProbCoverageProblem]) -> ProbCoverageProblem {
    let blocks = parts[0].blocks();
    let mut values = Vec::new();
    let mut entries: Vec<Vec<Vec<(usize, f64)>>> = blocks.iter().map(|&b| vec![Vec::new(); b]).collect();
    for p in parts {
        let offset = values.len();
        values.extend_from_slice(p.values());
        for (i, block) in entries.iter_mut().enumerate() {
            for (a, list) in block.iter_mut().enumerate() {
                list.extend(
                    p.entries(GroundElement::new(i, a))
                        .iter()
                        .map(|&(e, q)| (offset + e as usize, q)),
                );
            }
        }
    }
    ProbCoverageProblem::from_sparse(values, entries).expect("parts share blocks")
}

fn ground(m: &SimplePartitionMatroid) -> Vec<GroundElement> {
    (0..m.n_agents()).flat_map(|i| m.block(i)).collect()
}

/// A random permutation of `m`'s ground set split into consecutive
/// disjoint groups of the given sizes (truncated to what is available).
fn disjoint_sets<R: Rng + ?Sized>(m: &SimplePartitionMatroid, sizes: &[usize], rng: &mut R) -> Vec<Vec<GroundElement>> {
    let mut all = ground(m);
    all.shuffle(rng);
    let mut out = Vec::new();
    let mut rest = all.as_slice();
    for &s in sizes {
        let k = s.min(rest.len());
        out.push(rest[..k].to_vec());
        rest = &rest[k..];
    }
    out
}

fn sel(xs: &[GroundElement]) -> Selection {
    Selection::from_elements(xs.iter().copied()).expect("distinct elements")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub violations: usize,
    /// Largest violation seen, 0 when none.
    pub worst: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

struct Tally {
    name: &'static str,
    cases: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            cases: 0,
            violations: 0,
            worst: 0.0,
        }
    }

    /// Record a case asserting `lhs <= rhs + TOL`.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.cases += 1;
        let excess = lhs - rhs;
        if excess > TOL || excess.is_nan() {
            self.violations += 1;
            self.worst = self.worst.max(excess);
        }
    }

    fn done(self) -> CheckOutcome {
        CheckOutcome {
            name: self.name,
            cases: self.cases,
            violations: self.violations,
            worst: self.worst,
        }
    }
}

/// `f(S) <= f(T)` for random `S` inside `T`.
pub fn check_monotone<F: SetObjective>(
    name: &'static str,
    cases: usize,
    rng: &mut StreamRng,
    mut make: impl FnMut(&mut StreamRng) -> (F, SimplePartitionMatroid),
) -> CheckOutcome {
    let mut t = Tally::new(name);
    for _ in 0..cases {
        let (f, m) = make(rng);
        let total = ground(&m).len();
        let a = rng.random_range(0..=total);
        let b = rng.random_range(0..=total - a);
        let sets = disjoint_sets(&m, &[a, b], rng);
        let small = sets[0].clone();
        let big: Vec<_> = sets[0].iter().chain(&sets[1]).copied().collect();
        t.le(f.evaluate(&small), f.evaluate(&big));
    }
    t.done()
}

/// `f(x | A) >= f(x | B)` for random `A` inside `B` and `x` outside `B`.
pub fn check_submodular<F: SetObjective>(
    name: &'static str,
    cases: usize,
    rng: &mut StreamRng,
    mut make: impl FnMut(&mut StreamRng) -> (F, SimplePartitionMatroid),
) -> CheckOutcome {
    let mut t = Tally::new(name);
    while t.cases < cases {
        let (f, m) = make(rng);
        let total = ground(&m).len();
        if total < 1 {
            continue;
        }
        let a = rng.random_range(0..total);
        let b = rng.random_range(0..total - a);
        let sets = disjoint_sets(&m, &[1, a, b], rng);
        let x = sets[0][0];
        let small = &sets[1];
        let big: Vec<_> = sets[1].iter().chain(&sets[2]).copied().collect();
        let g_small = f.gain(&f.state_of(small), x);
        let g_big = f.gain(&f.state_of(&big), x);
        t.le(g_big, g_small);
    }
    t.done()
}

/// `f(a; b | C) <= f(a; b | D)` for random `C` inside `D`.
pub fn check_three_increasing<F: SetObjective>(
    name: &'static str,
    cases: usize,
    rng: &mut StreamRng,
    mut make: impl FnMut(&mut StreamRng) -> (F, SimplePartitionMatroid),
) -> CheckOutcome {
    let mut t = Tally::new(name);
    while t.cases < cases {
        let (f, m) = make(rng);
        let total = ground(&m).len();
        if total < 2 {
            continue;
        }
        let c = rng.random_range(0..=total - 2);
        let d = rng.random_range(0..=total - 2 - c);
        let sets = disjoint_sets(&m, &[2, c, d], rng);
        let (a, b) = (sets[0][0], sets[0][1]);
        let small = sel(&sets[1]);
        let big = sel(&sets[1].iter().chain(&sets[2]).copied().collect::<Vec<_>>());
        let lo = second_derivative(&f, a, b, &small).expect("disjoint");
        let hi = second_derivative(&f, a, b, &big).expect("disjoint");
        t.le(lo, hi);
    }
    t.done()
}

/// `f(Y | X)` equals the sum of sequential marginal gains.
pub fn check_chain_rule(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("chain rule");
    for _ in 0..cases {
        let f = random_coverage(rng, 4, 4, 6);
        let m = f.matroid();
        let total = ground(&m).len();
        let y = rng.random_range(0..=total.min(5));
        let x = rng.random_range(0..=total - y);
        let sets = disjoint_sets(&m, &[y, x], rng);
        let direct = set_gain(&f, &sets[0], &sets[1]);
        let mut state = f.state_of(&sets[1]);
        let mut summed = 0.0;
        for &e in &sets[0] {
            summed += f.gain(&state, e);
            f.insert(&mut state, e);
        }
        t.le((direct - summed).abs(), 0.0);
    }
    t.done()
}

/// `f(A | B, C) - f(A | C) >= sum_b f(A; b)` for disjoint `A`, `B`, `C`.
pub fn check_pairwise_redundancy(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("pairwise redundancy bound");
    while t.cases < cases {
        let f = random_coverage(rng, 4, 4, 6);
        let m = f.matroid();
        let total = ground(&m).len();
        if total < 2 {
            continue;
        }
        let a = rng.random_range(1..total);
        let b = rng.random_range(1..=total - a);
        let c = rng.random_range(0..=total - a - b);
        let sets = disjoint_sets(&m, &[a, b, c], rng);
        let (sa, sb, sc) = (&sets[0], &sets[1], &sets[2]);
        let bc: Vec<_> = sb.iter().chain(sc).copied().collect();
        let lhs = set_gain(&f, sa, &bc) - set_gain(&f, sa, sc);
        let rhs: f64 = sb.iter().map(|&x| set_gain(&f, sa, &[x]) - set_gain(&f, sa, &[])).sum();
        t.le(rhs, lhs);
    }
    t.done()
}

/// Capacity weights dominate pairwise weights on sum-decomposed instances.
pub fn check_capacity_dominance(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("capacity weights dominate pairwise weights");
    while t.cases < cases {
        let first = random_coverage(rng, 4, 4, 3);
        let blocks = first.blocks();
        if blocks.len() < 2 {
            continue;
        }
        let mut parts = vec![first];
        for _ in 0..rng.random_range(0..3) {
            parts.push(random_with_blocks(rng, &blocks, 3));
        }
        let f = sum_instance(&parts);
        let m = f.matroid();
        let probe = vec![ground(&m)];
        let w = redundancy_graph(&f, &m, Execution::Sequential);
        let cap = capacity_weights(&f, &parts, &m, &probe, Execution::Sequential).expect("exact decomposition");
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                t.le(w.weight(i, j), cap.weight(i, j));
            }
        }
    }
    t.done()
}

/// Capacity weights dominate pairwise weights for the tracking objective,
/// which is a sum over targets. The sampled information estimate is only
/// approximately monotone, so small `n_samples` produces violations.
pub fn check_tracking_capacity_dominance(cases: usize, n_samples: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("tracking capacity weights dominate pairwise weights");
    while t.cases < cases {
        let world = GridWorld::new(rng.random_range(3..8), rng.random_range(3..8)).expect("positive");
        let n = world.n_cells();
        let robots: Vec<usize> = (0..3).map(|_| rng.random_range(0..n)).collect();
        let filters: Vec<TargetFilter> = (0..2)
            .map(|_| {
                let mut f = TargetFilter::point_mass(&world, rng.random_range(0..n), 0.0);
                for _ in 0..rng.random_range(0..3) {
                    f.predict(&world);
                }
                f
            })
            .collect();
        let params = PlanningParams {
            n_samples,
            horizon: 1,
            local_target_range: None,
        };
        let f = TrackingObjective::new(world, &robots, &filters, params, rng.random()).expect("valid setup");
        let m = f.matroid();
        let w = redundancy_graph(&f, &m, Execution::Sequential);
        let cap = tracking_weights(&f, Execution::Sequential);
        for i in 0..3 {
            for j in i + 1..3 {
                t.le(w.weight(i, j), cap.weight(i, j));
            }
        }
    }
    t.done()
}

fn random_with_blocks<R: Rng + ?Sized>(rng: &mut R, blocks: &[usize], max_events: usize) -> ProbCoverageProblem {
    loop {
        let f = random_coverage(rng, 1, 1, max_events);
        let n_events = f.n_events();
        let entries = blocks
            .iter()
            .map(|&b| {
                (0..b)
                    .map(|_| {
                        (0..n_events)
                            .filter_map(|e| {
                                let q = rng.random::<f64>();
                                rng.random_bool(0.6).then_some((e, q))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        if let Ok(g) = ProbCoverageProblem::from_sparse(f.values().to_vec(), entries) {
            return g;
        }
    }
}

fn random_order<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Random DAG consistent with a random order; each earlier agent is an
/// in-neighbor with probability one half.
pub fn random_dag<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PlannerDag {
    let order = random_order(n, rng);
    let mut ins = vec![Vec::new(); n];
    for (k, &i) in order.iter().enumerate() {
        ins[i] = order[..k].iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    }
    PlannerDag::new(ins, order).expect("acyclic by construction")
}

/// Sequential greedy stays within half of the optimum.
pub fn check_half_optimal(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("sequential greedy is half-optimal");
    for _ in 0..cases {
        let f = random_coverage(rng, 4, 4, 6);
        let m = f.matroid();
        let (_, opt) = brute_force_optimum(&f, &m, DEFAULT_ENUMERATION_CAP).expect("small");
        let order = random_order(m.n_agents(), rng);
        let g = sequential_greedy(&f, &m, &order).expect("valid");
        t.le(0.5 * opt, g.value);
    }
    t.done()
}

/// `2 f(X^d) + deleted weight` bounds the optimum and the sequential value.
pub fn check_posthoc_bound(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("deleted-edge bound holds for DAG planning");
    for _ in 0..cases {
        let f = random_coverage(rng, 4, 4, 6);
        let m = f.matroid();
        let (_, opt) = brute_force_optimum(&f, &m, DEFAULT_ENUMERATION_CAP).expect("small");
        let g = redundancy_graph(&f, &m, Execution::Sequential);
        let dag = random_dag(m.n_agents(), rng);
        let r = dag_greedy(&f, &m, &dag).expect("valid");
        let bound = 2.0 * r.value + deleted_edge_weight(&g, &r.dag).expect("sizes agree");
        t.le(opt, bound);
        let seq = sequential_greedy(&f, &m, dag.agent_order()).expect("valid");
        t.le(seq.value, bound);
    }
    t.done()
}

/// `f* <= 2 f(X^d) + psi` and `f(seq) <= (1 + ceil(n/n_d)) f(X^d)` for DSGA.
pub fn check_dsga_bounds(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("distributed greedy assignment bounds");
    for _ in 0..cases {
        let f = random_coverage(rng, 4, 4, 6);
        let m = f.matroid();
        let n = m.n_agents();
        let (_, opt) = brute_force_optimum(&f, &m, DEFAULT_ENUMERATION_CAP).expect("small");
        let n_d = rng.random_range(1..=n);
        let r = dsga_plan(&f, &m, n_d).expect("valid");
        t.le(opt, 2.0 * r.value + r.psi.expect("dsga reports psi"));
        let seq = sequential_greedy(&f, &m, &(0..n).collect::<Vec<_>>()).expect("valid");
        t.le(seq.value, (1 + n.div_ceil(n_d)) as f64 * r.value);
        t.le(0.0, r.psi.expect("dsga reports psi"));
    }
    t.done()
}

/// Filters keep unit mass and bounded entropy under random predict/update.
pub fn check_filter_mass(cases: usize, rng: &mut StreamRng) -> CheckOutcome {
    let mut t = Tally::new("filter mass conservation");
    for _ in 0..cases {
        let world = GridWorld::new(rng.random_range(1..8), rng.random_range(1..8)).expect("positive");
        let n = world.n_cells();
        let thr = if rng.random_bool(0.5) { 1e-3 } else { 0.0 };
        let mut f = if rng.random_bool(0.5) {
            TargetFilter::point_mass(&world, rng.random_range(0..n), thr)
        } else {
            TargetFilter::uniform(&world, thr)
        };
        for _ in 0..rng.random_range(1..6) {
            f.predict(&world);
            let readings: Vec<(usize, f64)> = (0..rng.random_range(0..3))
                .map(|_| {
                    let r = rng.random_range(0..n);
                    let (m, v) = range_mean_var(world.distance(r, rng.random_range(0..n)));
                    (r, m + v.sqrt() * rng.random_range(-3.0..3.0))
                })
                .collect();
            f.update(&world, &readings);
            t.le((f.mass() - 1.0).abs(), 0.0);
            t.le(f.entropy(), (n as f64).log2());
        }
    }
    t.done()
}

fn small_coverage(rng: &mut StreamRng) -> (ProbCoverageProblem, SimplePartitionMatroid) {
    let f = random_coverage(rng, 4, 4, 6);
    let m = f.matroid();
    (f, m)
}

fn small_mutant(rng: &mut StreamRng) -> (SignFlippedCoverage, SimplePartitionMatroid) {
    let (f, m) = small_coverage(rng);
    (SignFlippedCoverage(f), m)
}

/// Every small-instance battery. With `mutant`, the coverage batteries run
/// on the sign-flipped objective instead.
pub fn tiny_suite(seed: u64, cases: usize, mutant: bool) -> Vec<CheckOutcome> {
    let rng = |k: u64| stream(seed, &[k]);
    let coverage = if mutant {
        vec![
            check_monotone("coverage is monotone", cases, &mut rng(1), small_mutant),
            check_submodular("coverage is submodular", cases, &mut rng(2), small_mutant),
            check_three_increasing("coverage is 3-increasing", cases, &mut rng(3), small_mutant),
        ]
    } else {
        vec![
            check_monotone("coverage is monotone", cases, &mut rng(1), small_coverage),
            check_submodular("coverage is submodular", cases, &mut rng(2), small_coverage),
            check_three_increasing("coverage is 3-increasing", cases, &mut rng(3), small_coverage),
        ]
    };
    let mut out = vec![
        check_half_optimal(cases, &mut rng(4)),
        check_posthoc_bound(cases, &mut rng(5)),
        check_dsga_bounds(cases, &mut rng(6)),
        check_pairwise_redundancy(cases, &mut rng(7)),
        check_chain_rule(cases, &mut rng(8)),
    ];
    out.extend(coverage);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t1_values() {
        let (f, _) = t1();
        let x = |a, b| GroundElement::new(a, b);
        assert_eq!(f.evaluate(&[x(0, 0)]), 2.0);
        assert_eq!(f.evaluate(&[x(1, 0)]), 2.0);
        assert_eq!(f.evaluate(&[x(1, 1)]), 2.0);
        assert_eq!(f.evaluate(&[x(0, 0), x(1, 0)]), 2.0);
        assert_eq!(f.evaluate(&[x(0, 0), x(1, 1)]), 3.0);
    }

    #[test]
    fn sum_instance_adds_values() {
        let mut rng = stream(5, &[]);
        let a = random_coverage(&mut rng, 3, 3, 4);
        let b = random_with_blocks(&mut rng, &a.blocks(), 4);
        let s = sum_instance(&[a.clone(), b.clone()]);
        let m = s.matroid();
        let all = ground(&m);
        assert!((s.evaluate(&all) - a.evaluate(&all) - b.evaluate(&all)).abs() < 1e-12);
    }

    #[test]
    fn suite_passes() {
        for o in tiny_suite(11, 150, false) {
            assert!(o.passed(), "{o:?}");
            assert_eq!(o.cases >= 150, true);
        }
    }

    #[test]
    fn mutant_breaks_submodularity() {
        let out = tiny_suite(11, 150, true);
        let sub = out.iter().find(|o| o.name == "coverage is submodular").unwrap();
        assert!(sub.violations > 0);
    }
}
