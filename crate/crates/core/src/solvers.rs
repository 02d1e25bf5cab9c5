//! Planners for submodular maximization over a simple partition matroid.
//!
//! Every planner returns a [`SolveResult`] whose selection lists decisions in
//! the order they were made. Agents decide with
//! [`SetObjective::local_gains`], so objectives with agent-local
//! approximations are planned with those approximations while `value` is
//! always the exact objective.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::exec::Execution;
use crate::geom::Point;
use crate::netsim::CommGraph;
use crate::redundancy::RedundancyGraph;
use crate::setfun::{GroundElement, Selection, SetObjective, SimplePartitionMatroid};

/// Which decisions each agent conditions on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerDag {
    in_neighbors: Vec<Vec<usize>>,
    agent_order: Vec<usize>,
}

impl PlannerDag {
    /// Neighbors must precede the agent in `agent_order`; anything else
    /// would make the graph cyclic.
    pub fn new(in_neighbors: Vec<Vec<usize>>, agent_order: Vec<usize>) -> Result<Self> {
        let n = in_neighbors.len();
        let pos = order_positions(&agent_order, n)?;
        for (i, ns) in in_neighbors.iter().enumerate() {
            for &j in ns {
                if j >= n {
                    return invalid_arg(format!("in-neighbor {j} of agent {i} out of range"));
                }
                if pos[j] >= pos[i] {
                    return invalid_arg(format!(
                        "in-neighbor {j} of agent {i} is not earlier in the order, so the graph is cyclic"
                    ));
                }
            }
        }
        let mut in_neighbors = in_neighbors;
        for ns in &mut in_neighbors {
            ns.sort_unstable();
            ns.dedup();
        }
        Ok(PlannerDag {
            in_neighbors,
            agent_order,
        })
    }

    /// Every agent conditions on all earlier agents.
    pub fn complete(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let pos = order_positions(&order, n)?;
        let in_neighbors = (0..n)
            .map(|i| order[..pos[i]].to_vec())
            .collect();
        Self::new(in_neighbors, order)
    }

    /// No agent conditions on anyone.
    pub fn empty(n: usize) -> Self {
        PlannerDag {
            in_neighbors: vec![Vec::new(); n],
            agent_order: (0..n).collect(),
        }
    }

    /// Agents ordered by `(round, id)`; each conditions on every agent from a
    /// strictly earlier round.
    pub fn from_rounds(rounds: &[usize]) -> Self {
        let order = round_order(rounds);
        let in_neighbors = (0..rounds.len())
            .map(|i| {
                (0..rounds.len())
                    .filter(|&j| rounds[j] < rounds[i])
                    .collect()
            })
            .collect();
        PlannerDag {
            in_neighbors,
            agent_order: order,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.in_neighbors.len()
    }

    pub fn in_neighbors(&self, agent: usize) -> &[usize] {
        &self.in_neighbors[agent]
    }

    pub fn agent_order(&self) -> &[usize] {
        &self.agent_order
    }

    /// Earlier agents that `agent` does not condition on.
    pub fn ignored(&self, agent: usize) -> Vec<usize> {
        let pos = self.agent_order.iter().position(|&a| a == agent).expect("agent in order");
        let mut out: Vec<usize> = self.agent_order[..pos]
            .iter()
            .copied()
            .filter(|j| self.in_neighbors[agent].binary_search(j).is_err())
            .collect();
        out.sort_unstable();
        out
    }

    /// Remove in-neighbors for which `keep(agent, neighbor)` is false.
    pub fn pruned(&self, keep: impl Fn(usize, usize) -> bool) -> PlannerDag {
        let in_neighbors = self
            .in_neighbors
            .iter()
            .enumerate()
            .map(|(i, ns)| ns.iter().copied().filter(|&j| keep(i, j)).collect())
            .collect();
        PlannerDag {
            in_neighbors,
            agent_order: self.agent_order.clone(),
        }
    }

    /// Agents grouped by longest dependency chain. Agents within a level are
    /// independent of each other.
    pub fn levels(&self) -> Vec<Vec<usize>> {
        let mut level = vec![0usize; self.n_agents()];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for &i in &self.agent_order {
            level[i] = self.in_neighbors[i]
                .iter()
                .map(|&j| level[j] + 1)
                .max()
                .unwrap_or(0);
            if out.len() <= level[i] {
                out.resize_with(level[i] + 1, Vec::new);
            }
            out[level[i]].push(i);
        }
        out
    }
}

fn order_positions(order: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut pos = vec![usize::MAX; n];
    if order.len() != n {
        return invalid_arg(format!("order has {} agents, expected {n}", order.len()));
    }
    for (k, &a) in order.iter().enumerate() {
        if a >= n || pos[a] != usize::MAX {
            return invalid_arg("agent order is not a permutation");
        }
        pos[a] = k;
    }
    Ok(pos)
}

fn round_order(rounds: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rounds.len()).collect();
    order.sort_by_key(|&i| (rounds[i], i));
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RoundPolicy {
    Fixed(usize),
    GlobalAdaptive(f64),
    LocalAdaptive(f64),
}

impl RoundPolicy {
    fn validate(&self) -> Result<()> {
        match *self {
            RoundPolicy::Fixed(0) => invalid_arg("number of rounds must be at least 1"),
            RoundPolicy::GlobalAdaptive(g) | RoundPolicy::LocalAdaptive(g) if !(g > 0.0 && g.is_finite()) => {
                invalid_arg(format!("gamma must be positive, got {g}"))
            }
            _ => Ok(()),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        !matches!(self, RoundPolicy::Fixed(_))
    }
}

/// How messages for a run should be accounted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SolverFamily {
    /// Decisions passed along `dag.agent_order`.
    Sequential,
    /// Round-based partitions; `round_of_agent` is set.
    Partition,
    /// List exchange: sent list lengths per round per agent.
    Auction { list_lengths: Vec<Vec<usize>> },
    Dsga,
    /// Centralized or uncoordinated planners with no message model.
    Baseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DsgaCommit {
    pub round: usize,
    pub element: GroundElement,
    pub initial_gain: f64,
    pub commit_gain: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub selection: Selection,
    pub value: f64,
    /// Marginal gain of each agent's decision as computed when it was made,
    /// indexed by agent.
    pub per_agent_gain: Vec<f64>,
    pub rounds_used: usize,
    pub psi: Option<f64>,
    pub dsga_trace: Option<Vec<DsgaCommit>>,
    pub dag: PlannerDag,
    pub round_of_agent: Option<Vec<usize>>,
    pub converged: bool,
    pub family: SolverFamily,
}

impl SolveResult {
    fn base<F: SetObjective>(f: &F, selection: Selection, per_agent_gain: Vec<f64>, dag: PlannerDag) -> Self {
        SolveResult {
            value: f.evaluate(selection.as_slice()),
            selection,
            per_agent_gain,
            rounds_used: 1,
            psi: None,
            dsga_trace: None,
            dag,
            round_of_agent: None,
            converged: true,
            family: SolverFamily::Baseline,
        }
    }

    /// Number of rounds a partition planner used (`n_d`), if any.
    pub fn n_rounds(&self) -> Option<usize> {
        self.round_of_agent.as_ref().map(|r| r.iter().copied().max().unwrap_or(1))
    }
}

/// First maximum; later equal values do not replace it.
fn argmax(gains: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (a, &g) in gains.iter().enumerate() {
        if g > best.1 {
            best = (a, g);
        }
    }
    best
}

fn check_blocks<F: SetObjective>(_f: &F, m: &SimplePartitionMatroid) -> Result<()> {
    if m.blocks().contains(&0) {
        return Err(Error::InvalidProblem("empty block".into()));
    }
    Ok(())
}

/// Agents in `order` each pick their best action given every prior pick.
pub fn sequential_greedy<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    order: &[usize],
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    let dag = PlannerDag::complete(order.to_vec())?;
    let mut state = f.empty_state();
    let mut selection = Selection::new();
    let mut gains = vec![0.0; m.n_agents()];
    for &i in order {
        let (a, g) = argmax(&f.local_gains(&state, i, m.block_size(i)));
        let x = GroundElement::new(i, a);
        f.insert(&mut state, x);
        selection.push(x)?;
        gains[i] = g;
    }
    let mut r = SolveResult::base(f, selection, gains, dag);
    r.rounds_used = m.n_agents();
    r.family = SolverFamily::Sequential;
    Ok(r)
}

/// Repeatedly commits the globally best feasible element.
pub fn general_greedy<F: SetObjective>(f: &F, m: &SimplePartitionMatroid) -> Result<SolveResult> {
    general_greedy_with(f, m, Execution::default())
}

pub fn general_greedy_with<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    exec: Execution,
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    let n = m.n_agents();
    let mut state = f.empty_state();
    let mut selection = Selection::new();
    let mut gains = vec![0.0; n];
    let mut open: Vec<usize> = (0..n).collect();
    while !open.is_empty() {
        let bests = exec.map_slice(&open, |&i| argmax(&f.local_gains(&state, i, m.block_size(i))));
        let mut pick = 0;
        for k in 1..open.len() {
            if bests[k].1 > bests[pick].1 {
                pick = k;
            }
        }
        let i = open.remove(pick);
        let x = GroundElement::new(i, bests[pick].0);
        f.insert(&mut state, x);
        selection.push(x)?;
        gains[i] = bests[pick].1;
    }
    let order = selection.iter().map(|x| x.agent).collect();
    let mut r = SolveResult::base(f, selection, gains, PlannerDag::complete(order)?);
    r.rounds_used = n;
    Ok(r)
}

/// Each agent maximizes its gain given only the decisions of its
/// in-neighbors. Agents in the same topological level run concurrently.
pub fn dag_greedy<F: SetObjective>(f: &F, m: &SimplePartitionMatroid, dag: &PlannerDag) -> Result<SolveResult> {
    dag_greedy_with(f, m, dag, Execution::default())
}

pub fn dag_greedy_with<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    dag: &PlannerDag,
    exec: Execution,
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    let n = m.n_agents();
    if dag.n_agents() != n {
        return invalid_arg(format!("DAG has {} agents, matroid has {n}", dag.n_agents()));
    }
    let mut action = vec![usize::MAX; n];
    let mut gains = vec![0.0; n];
    for level in dag.levels() {
        let picks = exec.map_slice(&level, |&i| {
            let prior: Vec<GroundElement> = dag
                .in_neighbors(i)
                .iter()
                .map(|&j| GroundElement::new(j, action[j]))
                .collect();
            argmax(&f.local_gains(&f.state_of(&prior), i, m.block_size(i)))
        });
        for (&i, (a, g)) in level.iter().zip(picks) {
            action[i] = a;
            gains[i] = g;
        }
    }
    let selection = Selection::from_elements(dag.agent_order().iter().map(|&i| GroundElement::new(i, action[i])))?;
    let mut r = SolveResult::base(f, selection, gains, dag.clone());
    r.rounds_used = dag.levels().len();
    r.family = SolverFamily::Sequential;
    Ok(r)
}

/// Every agent maximizes its singleton value.
pub fn myopic_plan<F: SetObjective>(f: &F, m: &SimplePartitionMatroid) -> Result<SolveResult> {
    let mut r = dag_greedy(f, m, &PlannerDag::empty(m.n_agents()))?;
    r.family = SolverFamily::Baseline;
    Ok(r)
}

/// One uniformly random action per agent.
pub fn random_plan<F: SetObjective, R: Rng + ?Sized>(
    f: &F,
    m: &SimplePartitionMatroid,
    rng: &mut R,
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    let selection = Selection::from_elements(
        (0..m.n_agents()).map(|i| GroundElement::new(i, rng.random_range(0..m.block_size(i)))),
    )?;
    let mut state = f.empty_state();
    let mut gains = vec![0.0; m.n_agents()];
    for &x in selection.iter() {
        gains[x.agent] = f.gain(&state, x);
        f.insert(&mut state, x);
    }
    Ok(SolveResult::base(f, selection, gains, PlannerDag::empty(m.n_agents())))
}

/// Draw a round in `1..=k_i` for every agent. Returns the rounds and `n_d`.
pub fn rsp_assign_rounds<R: Rng + ?Sized>(
    n_agents: usize,
    policy: RoundPolicy,
    weights: Option<&RedundancyGraph>,
    rng: &mut R,
) -> Result<(Vec<usize>, usize)> {
    policy.validate()?;
    let k: Vec<usize> = match policy {
        RoundPolicy::Fixed(n_d) => vec![n_d; n_agents],
        RoundPolicy::GlobalAdaptive(gamma) => {
            let w = adaptive_weights(weights, n_agents)?;
            let n_d = ceil_rounds(w.total_weight() / (n_agents as f64 * gamma));
            vec![n_d; n_agents]
        }
        RoundPolicy::LocalAdaptive(gamma) => {
            let w = adaptive_weights(weights, n_agents)?;
            (0..n_agents).map(|i| ceil_rounds(w.row_sum(i) / (2.0 * gamma))).collect()
        }
    };
    let rounds = k.iter().map(|&k| rng.random_range(1..=k)).collect();
    let n_d = k.iter().copied().max().unwrap_or(1);
    Ok((rounds, n_d))
}

fn adaptive_weights(w: Option<&RedundancyGraph>, n: usize) -> Result<&RedundancyGraph> {
    match w {
        Some(w) if w.n_agents() == n => Ok(w),
        Some(w) => invalid_arg(format!("redundancy graph has {} agents, expected {n}", w.n_agents())),
        None => invalid_arg("adaptive round policies need redundancy weights"),
    }
}

fn ceil_rounds(x: f64) -> usize {
    let r = x.ceil();
    if r.is_finite() && r >= 1.0 {
        r as usize
    } else {
        1
    }
}

/// Greedy planning where each agent conditions on every agent from an
/// earlier round, optionally only those within `range` of it.
pub fn partition_plan<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    rounds: &[usize],
    range: Option<(&[Point], f64)>,
    exec: Execution,
) -> Result<SolveResult> {
    if rounds.len() != m.n_agents() {
        return invalid_arg(format!("{} rounds for {} agents", rounds.len(), m.n_agents()));
    }
    if rounds.contains(&0) {
        return invalid_arg("rounds are numbered from 1");
    }
    let mut dag = PlannerDag::from_rounds(rounds);
    if let Some((pos, r_c)) = range {
        if !(r_c > 0.0) {
            return invalid_arg(format!("communication range must be positive, got {r_c}"));
        }
        if pos.len() != m.n_agents() {
            return invalid_arg(format!("{} positions for {} agents", pos.len(), m.n_agents()));
        }
        dag = dag.pruned(|i, j| pos[i].dist(&pos[j]) <= r_c);
    }
    let mut r = dag_greedy_with(f, m, &dag, exec)?;
    r.rounds_used = rounds.iter().copied().max().unwrap_or(1);
    r.round_of_agent = Some(rounds.to_vec());
    r.family = SolverFamily::Partition;
    Ok(r)
}

/// Randomized sequential partitions.
pub fn rsp_plan<F: SetObjective, R: Rng + ?Sized>(
    f: &F,
    m: &SimplePartitionMatroid,
    policy: RoundPolicy,
    weights: Option<&RedundancyGraph>,
    rng: &mut R,
) -> Result<SolveResult> {
    let (rounds, n_d) = rsp_assign_rounds(m.n_agents(), policy, weights, rng)?;
    let mut r = partition_plan(f, m, &rounds, None, Execution::default())?;
    r.rounds_used = n_d;
    Ok(r)
}

/// Randomized sequential partitions that also ignore agents beyond `r_c`.
pub fn rrsp_plan<F: SetObjective, R: Rng + ?Sized>(
    f: &F,
    m: &SimplePartitionMatroid,
    policy: RoundPolicy,
    weights: Option<&RedundancyGraph>,
    positions: &[Point],
    r_c: f64,
    rng: &mut R,
) -> Result<SolveResult> {
    let (rounds, n_d) = rsp_assign_rounds(m.n_agents(), policy, weights, rng)?;
    let mut r = partition_plan(f, m, &rounds, Some((positions, r_c)), Execution::default())?;
    r.rounds_used = n_d;
    Ok(r)
}

/// Distributed sequential greedy assignment with `n_d` rounds.
///
/// Each round every unassigned agent plans once against the fixed set. Then
/// `ceil(n_a / n_d)` of those plans are committed one at a time, each time
/// choosing the plan whose gain decayed least since planning (ties: larger
/// initial gain, then lower agent id).
pub fn dsga_plan<F: SetObjective>(f: &F, m: &SimplePartitionMatroid, n_d: usize) -> Result<SolveResult> {
    dsga_plan_with(f, m, n_d, Execution::default())
}

pub fn dsga_plan_with<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    n_d: usize,
    exec: Execution,
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    if n_d == 0 {
        return invalid_arg("number of rounds must be at least 1");
    }
    let n = m.n_agents();
    let per_round = n.div_ceil(n_d);
    let mut fixed = f.empty_state();
    let mut selection = Selection::new();
    let mut gains = vec![0.0; n];
    let mut round_of = vec![0usize; n];
    let mut trace = Vec::with_capacity(n);
    let mut open: Vec<usize> = (0..n).collect();
    let mut round = 0;
    while !open.is_empty() && round < n_d {
        round += 1;
        let plans = exec.map_slice(&open, |&i| argmax(&f.local_gains(&fixed, i, m.block_size(i))));
        let mut cands: Vec<(usize, usize, f64, f64)> = open
            .iter()
            .zip(plans)
            .map(|(&i, (a, g))| (i, a, g, g))
            .collect();
        for _ in 0..per_round.min(cands.len()) {
            let mut pick = 0;
            for k in 1..cands.len() {
                let (_, _, i0, ifk) = cands[k];
                let (_, _, b0, bf) = cands[pick];
                let (dk, db) = (i0 - ifk, b0 - bf);
                if dk < db || (dk == db && i0 > b0) {
                    pick = k;
                }
            }
            let (i, a, i0, i_f) = cands.remove(pick);
            let x = GroundElement::new(i, a);
            f.insert(&mut fixed, x);
            selection.push(x)?;
            gains[i] = i_f;
            round_of[i] = round;
            trace.push(DsgaCommit {
                round,
                element: x,
                initial_gain: i0,
                commit_gain: i_f,
            });
            let updated = exec.map_slice(&cands, |c| f.gain(&fixed, GroundElement::new(c.0, c.1)));
            for (c, g) in cands.iter_mut().zip(updated) {
                c.3 = g;
            }
        }
        open = cands.iter().map(|c| c.0).collect();
        open.sort_unstable();
    }
    let dag = PlannerDag::new(
        (0..n)
            .map(|i| (0..n).filter(|&j| round_of[j] < round_of[i]).collect())
            .collect(),
        selection.iter().map(|x| x.agent).collect(),
    )?;
    let psi = trace.iter().map(|c| c.initial_gain - c.commit_gain).sum();
    let mut r = SolveResult::base(f, selection, gains, dag);
    r.rounds_used = round;
    r.psi = Some(psi);
    r.dsga_trace = Some(trace);
    r.round_of_agent = Some(round_of);
    r.family = SolverFamily::Dsga;
    Ok(r)
}

/// One bid in an auction list.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Bid {
    value: f64,
    element: GroundElement,
}

/// `Some` beats `None`; otherwise larger value, then smaller element.
fn beats(a: Option<&Bid>, b: Option<&Bid>) -> bool {
    match (a, b) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(a), Some(b)) => a.value > b.value || (a.value == b.value && a.element < b.element),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AuctionKind {
    Global,
    Local,
}

pub fn default_auction_rounds(n_agents: usize) -> usize {
    3 * n_agents.max(1)
}

/// Auction where agents re-run general greedy over their own block and
/// every assignment they have heard of.
pub fn global_auction<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    comm: &CommGraph,
    max_rounds: usize,
) -> Result<SolveResult> {
    auction(f, m, comm, max_rounds, AuctionKind::Global, Execution::default())
}

/// Auction where agents only evaluate their own bids and exchange
/// assignment lists together with the bid values.
pub fn local_auction<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    comm: &CommGraph,
    max_rounds: usize,
) -> Result<SolveResult> {
    auction(f, m, comm, max_rounds, AuctionKind::Local, Execution::default())
}

pub fn auction<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    comm: &CommGraph,
    max_rounds: usize,
    kind: AuctionKind,
    exec: Execution,
) -> Result<SolveResult> {
    check_blocks(f, m)?;
    let n = m.n_agents();
    if comm.n_agents() != n {
        return invalid_arg(format!("communication graph has {} agents, expected {n}", comm.n_agents()));
    }
    let empty = f.empty_state();
    let mut lists: Vec<Vec<Bid>> = exec.map(n, |i| {
        let (a, v) = argmax(&f.local_gains(&empty, i, m.block_size(i)));
        vec![Bid {
            value: v,
            element: GroundElement::new(i, a),
        }]
    });
    let mut sent = Vec::new();
    let mut converged = false;
    while sent.len() < max_rounds {
        sent.push(lists.iter().map(Vec::len).collect());
        let snapshot = &lists;
        lists = exec.map(n, |i| match kind {
            AuctionKind::Global => {
                let mut ground: Vec<GroundElement> = m.block(i).collect();
                for &j in std::iter::once(&i).chain(comm.neighbors(i)) {
                    ground.extend(snapshot[j].iter().map(|b| b.element));
                }
                ground.sort_unstable();
                ground.dedup();
                restricted_greedy(f, &ground)
            }
            AuctionKind::Local => {
                let mut own = snapshot[i].clone();
                for &j in comm.neighbors(i) {
                    own = update_assignments(f, m, i, own, &snapshot[j]);
                }
                own
            }
        });
        if lists.iter().all(|l| l == &lists[0]) {
            converged = true;
            break;
        }
    }
    let executed: Vec<GroundElement> = (0..n)
        .map(|i| {
            lists[i]
                .iter()
                .find(|b| b.element.agent == i)
                .map(|b| b.element)
                .expect("every list holds its owner's assignment")
        })
        .collect();
    let (selection, gains) = if converged {
        let mut gains = vec![0.0; n];
        for b in &lists[0] {
            gains[b.element.agent] = b.value;
        }
        (Selection::from_elements(lists[0].iter().map(|b| b.element))?, gains)
    } else {
        let mut state = f.empty_state();
        let mut gains = vec![0.0; n];
        for &x in &executed {
            gains[x.agent] = f.gain(&state, x);
            f.insert(&mut state, x);
        }
        (Selection::from_elements(executed)?, gains)
    };
    let order = selection.iter().map(|x| x.agent).collect();
    let mut r = SolveResult::base(f, selection, gains, PlannerDag::complete(order)?);
    r.rounds_used = sent.len();
    r.converged = converged;
    r.family = SolverFamily::Auction { list_lengths: sent };
    Ok(r)
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    bound: f64,
    element: GroundElement,
    step: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.element.cmp(&self.element))
    }
}

/// General greedy restricted to `ground`, with at most one element per
/// agent. Uses lazy evaluation when the objective's gains are exact.
fn restricted_greedy<F: SetObjective>(f: &F, ground: &[GroundElement]) -> Vec<Bid> {
    let mut state = f.empty_state();
    let mut taken = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    if f.exact_submodular() {
        let mut heap: BinaryHeap<HeapEntry> = ground
            .iter()
            .map(|&x| HeapEntry {
                bound: f.gain(&state, x),
                element: x,
                step: 0,
            })
            .collect();
        while let Some(top) = heap.pop() {
            if taken.contains(&top.element.agent) {
                continue;
            }
            if top.step == out.len() {
                f.insert(&mut state, top.element);
                taken.insert(top.element.agent);
                out.push(Bid {
                    value: top.bound,
                    element: top.element,
                });
            } else {
                heap.push(HeapEntry {
                    bound: f.gain(&state, top.element),
                    step: out.len(),
                    ..top
                });
            }
        }
        return out;
    }
    loop {
        let mut best: Option<Bid> = None;
        for &x in ground {
            if taken.contains(&x.agent) {
                continue;
            }
            let b = Bid {
                value: f.gain(&state, x),
                element: x,
            };
            if beats(Some(&b), best.as_ref()) {
                best = Some(b);
            }
        }
        match best {
            Some(b) => {
                f.insert(&mut state, b.element);
                taken.insert(b.element.agent);
                out.push(b);
            }
            None => return out,
        }
    }
}

/// Merge another agent's list into agent `me`'s list. Lists are compared
/// position by position with missing entries treated as the worst bid.
fn update_assignments<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    me: usize,
    local: Vec<Bid>,
    other: &[Bid],
) -> Vec<Bid> {
    let len = local.len().max(other.len());
    let Some(n_diff) = (0..len).find(|&k| local.get(k) != other.get(k)) else {
        return local;
    };
    if !beats(other.get(n_diff), local.get(n_diff)) {
        return local;
    }
    if other.iter().any(|b| b.element.agent == me) {
        return other.to_vec();
    }
    let mut state = f.state_of(&other[..n_diff].iter().map(|b| b.element).collect::<Vec<_>>());
    for pos in n_diff..=other.len() {
        let (a, v) = argmax(&f.local_gains(&state, me, m.block_size(me)));
        let bid = Bid {
            value: v,
            element: GroundElement::new(me, a),
        };
        if beats(Some(&bid), other.get(pos)) {
            let mut out = other[..pos].to_vec();
            out.push(bid);
            return out;
        }
        f.insert(&mut state, other[pos].element);
    }
    unreachable!("every bid beats the empty position past the end")
}

/// Parsed solver description, as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SolverSpec {
    Random,
    Myopic,
    Sequential,
    General,
    Dsga(usize),
    Rsp(RoundPolicy),
    Rrsp(RoundPolicy, f64),
    Auction(AuctionKind, Option<usize>),
}

impl fmt::Display for SolverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn policy(p: &RoundPolicy) -> String {
            match p {
                RoundPolicy::Fixed(n) => n.to_string(),
                RoundPolicy::GlobalAdaptive(g) => format!("global:{g}"),
                RoundPolicy::LocalAdaptive(g) => format!("local:{g}"),
            }
        }
        match self {
            SolverSpec::Random => write!(f, "random"),
            SolverSpec::Myopic => write!(f, "myopic"),
            SolverSpec::Sequential => write!(f, "sequential"),
            SolverSpec::General => write!(f, "general"),
            SolverSpec::Dsga(n) => write!(f, "dsga:{n}"),
            SolverSpec::Rsp(p) => write!(f, "rsp:{}", policy(p)),
            SolverSpec::Rrsp(p, r) => write!(f, "rrsp:{}:{r}", policy(p)),
            SolverSpec::Auction(k, rounds) => {
                let k = match k {
                    AuctionKind::Global => "global",
                    AuctionKind::Local => "local",
                };
                match rounds {
                    Some(r) => write!(f, "auction:{k}:{r}"),
                    None => write!(f, "auction:{k}"),
                }
            }
        }
    }
}

impl FromStr for SolverSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::InvalidArgument(format!("unrecognized solver '{s}'"));
        let count = |p: &str| -> Result<usize> {
            match p.parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Error::InvalidArgument(format!("'{p}' in solver '{s}' must be a positive integer"))),
            }
        };
        let real = |p: &str| -> Result<f64> {
            match p.parse::<f64>() {
                Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
                _ => Err(Error::InvalidArgument(format!("'{p}' in solver '{s}' must be a positive number"))),
            }
        };
        let policy = |p: &[&str]| -> Result<RoundPolicy> {
            match p {
                [n] => Ok(RoundPolicy::Fixed(count(n)?)),
                ["global", g] => Ok(RoundPolicy::GlobalAdaptive(real(g)?)),
                ["local", g] => Ok(RoundPolicy::LocalAdaptive(real(g)?)),
                _ => Err(bad()),
            }
        };
        Ok(match parts.as_slice() {
            ["random"] => SolverSpec::Random,
            ["myopic"] => SolverSpec::Myopic,
            ["sequential"] => SolverSpec::Sequential,
            ["general"] => SolverSpec::General,
            ["dsga", n] => SolverSpec::Dsga(count(n)?),
            ["rsp", rest @ ..] => SolverSpec::Rsp(policy(rest)?),
            ["rrsp", rest @ .., r] if !rest.is_empty() => SolverSpec::Rrsp(policy(rest)?, real(r)?),
            ["auction", kind, rest @ ..] if rest.len() <= 1 => {
                let kind = match *kind {
                    "global" => AuctionKind::Global,
                    "local" => AuctionKind::Local,
                    _ => return Err(bad()),
                };
                SolverSpec::Auction(kind, rest.first().map(|r| count(r)).transpose()?)
            }
            _ => return Err(bad()),
        })
    }
}

impl SolverSpec {
    pub fn needs_weights(&self) -> bool {
        matches!(self, SolverSpec::Rsp(p) | SolverSpec::Rrsp(p, _) if p.is_adaptive())
    }

    pub fn needs_comm_graph(&self) -> bool {
        matches!(self, SolverSpec::Auction(..))
    }

    pub fn uses_rng(&self) -> bool {
        matches!(self, SolverSpec::Random | SolverSpec::Rsp(_) | SolverSpec::Rrsp(..))
    }
}

/// Problem data that only some solvers need.
#[derive(Clone, Copy, Debug, Default)]
pub struct SolveContext<'a> {
    pub positions: Option<&'a [Point]>,
    pub weights: Option<&'a RedundancyGraph>,
    pub comm: Option<&'a CommGraph>,
    pub exec: Execution,
}

/// Run the solver described by `spec`.
pub fn solve<F: SetObjective, R: Rng + ?Sized>(
    spec: &SolverSpec,
    f: &F,
    m: &SimplePartitionMatroid,
    ctx: &SolveContext<'_>,
    rng: &mut R,
) -> Result<SolveResult> {
    let n = m.n_agents();
    match *spec {
        SolverSpec::Random => random_plan(f, m, rng),
        SolverSpec::Myopic => {
            let mut r = dag_greedy_with(f, m, &PlannerDag::empty(n), ctx.exec)?;
            r.family = SolverFamily::Baseline;
            Ok(r)
        }
        SolverSpec::Sequential => sequential_greedy(f, m, &(0..n).collect::<Vec<_>>()),
        SolverSpec::General => general_greedy_with(f, m, ctx.exec),
        SolverSpec::Dsga(n_d) => dsga_plan_with(f, m, n_d, ctx.exec),
        SolverSpec::Rsp(policy) => {
            let (rounds, n_d) = rsp_assign_rounds(n, policy, ctx.weights, rng)?;
            let mut r = partition_plan(f, m, &rounds, None, ctx.exec)?;
            r.rounds_used = n_d;
            Ok(r)
        }
        SolverSpec::Rrsp(policy, r_c) => {
            let pos = ctx
                .positions
                .ok_or_else(|| Error::InvalidArgument("range-limited planning needs agent positions".into()))?;
            let (rounds, n_d) = rsp_assign_rounds(n, policy, ctx.weights, rng)?;
            let mut r = partition_plan(f, m, &rounds, Some((pos, r_c)), ctx.exec)?;
            r.rounds_used = n_d;
            Ok(r)
        }
        SolverSpec::Auction(kind, rounds) => {
            let comm = ctx
                .comm
                .ok_or_else(|| Error::InvalidArgument("auctions need a communication graph".into()))?;
            auction(f, m, comm, rounds.unwrap_or_else(|| default_auction_rounds(n)), kind, ctx.exec)
        }
    }
}
