//! Redundancy graphs and suboptimality bounds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::exec::Execution;
use crate::setfun::{GroundElement, Selection, SetObjective, SimplePartitionMatroid};
use crate::solvers::{DsgaCommit, PlannerDag, SolveResult};

/// Symmetric non-negative inter-agent weights with a zero diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedundancyGraph {
    n: usize,
    w: Vec<f64>,
}

impl RedundancyGraph {
    pub fn zeros(n: usize) -> Self {
        RedundancyGraph { n, w: vec![0.0; n * n] }
    }

    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut g = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return invalid_arg("weight matrix must be square");
            }
            for (j, &w) in row.iter().enumerate() {
                if !(w >= 0.0 && w.is_finite()) {
                    return invalid_arg(format!("weight ({i}, {j}) = {w} must be finite and non-negative"));
                }
                if i == j && w != 0.0 {
                    return invalid_arg("weight matrix diagonal must be zero");
                }
                if w != rows[j][i] {
                    return invalid_arg("weight matrix must be symmetric");
                }
                g.w[i * n + j] = w;
            }
        }
        Ok(g)
    }

    fn set(&mut self, i: usize, j: usize, w: f64) {
        self.w[i * self.n + j] = w;
        self.w[j * self.n + i] = w;
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// `sum_j w_ij`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.w[i * self.n..(i + 1) * self.n].iter().sum()
    }

    /// Sum over undirected edges, each counted once.
    pub fn total_weight(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .map(|(i, j)| self.weight(i, j))
            .sum()
    }

    /// Total weight relative to a reference objective value.
    pub fn alpha(&self, reference_value: f64) -> f64 {
        self.total_weight() / reference_value
    }
}

/// `max over (x_i, x_j) of -f(x_i; x_j)`, clamped at zero.
pub fn pairwise_weight<F: SetObjective>(f: &F, m: &SimplePartitionMatroid, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return invalid_arg("pairwise weight needs two distinct agents");
    }
    if i >= m.n_agents() || j >= m.n_agents() {
        return invalid_arg(format!("agent pair ({i}, {j}) out of range"));
    }
    if !f.may_interact(i, j) {
        return Ok(0.0);
    }
    let empty = f.empty_state();
    let lone: Vec<f64> = m.block(j).map(|y| f.gain(&empty, y)).collect();
    let mut w = 0.0f64;
    for x in m.block(i) {
        let mut s = empty.clone();
        f.insert(&mut s, x);
        for (y, g) in m.block(j).zip(&lone) {
            w = w.max(g - f.gain(&s, y));
        }
    }
    Ok(w)
}

/// Pairwise weights for every agent pair.
pub fn redundancy_graph<F: SetObjective>(f: &F, m: &SimplePartitionMatroid, exec: Execution) -> RedundancyGraph {
    let n = m.n_agents();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let ws = exec.map_slice(&pairs, |&(i, j)| pairwise_weight(f, m, i, j).expect("valid pair"));
    let mut g = RedundancyGraph::zeros(n);
    for (&(i, j), w) in pairs.iter().zip(ws) {
        g.set(i, j, w);
    }
    g
}

/// `C[i][k]`: best singleton value of agent `i` on component `k`, as seen by
/// that agent's local oracle.
pub fn capacities<G: SetObjective>(components: &[G], m: &SimplePartitionMatroid, exec: Execution) -> Vec<Vec<f64>> {
    exec.map(m.n_agents(), |i| {
        components
            .iter()
            .map(|g| {
                g.local_gains(&g.empty_state(), i, m.block_size(i))
                    .into_iter()
                    .fold(0.0, f64::max)
            })
            .collect()
    })
}

/// `W(i, j) = sum_k min(C_ik, C_jk)`.
pub fn capacity_graph(caps: &[Vec<f64>]) -> RedundancyGraph {
    let n = caps.len();
    let mut g = RedundancyGraph::zeros(n);
    for i in 0..n {
        for j in i + 1..n {
            let w = caps[i].iter().zip(&caps[j]).map(|(a, b)| a.min(*b)).sum();
            g.set(i, j, w);
        }
    }
    g
}

/// Capacity-based weights for an objective `f` that is the sum of
/// `components`. The decomposition is checked on `probes`.
pub fn capacity_weights<F: SetObjective, G: SetObjective>(
    f: &F,
    components: &[G],
    m: &SimplePartitionMatroid,
    probes: &[Vec<GroundElement>],
    exec: Execution,
) -> Result<RedundancyGraph> {
    for s in probes {
        let total = f.evaluate(s);
        let parts: f64 = components.iter().map(|g| g.evaluate(s)).sum();
        if (total - parts).abs() > 1e-9 * total.abs().max(1.0) {
            return invalid_arg(format!(
                "components sum to {parts} but the objective is {total} on a probe set"
            ));
        }
    }
    Ok(capacity_graph(&capacities(components, m, exec)))
}

/// Total weight of edges from each agent to the earlier agents it ignores.
pub fn deleted_edge_weight(graph: &RedundancyGraph, dag: &PlannerDag) -> Result<f64> {
    if graph.n_agents() != dag.n_agents() {
        return invalid_arg(format!(
            "graph has {} agents, DAG has {}",
            graph.n_agents(),
            dag.n_agents()
        ));
    }
    Ok((0..dag.n_agents())
        .map(|i| dag.ignored(i).iter().map(|&j| graph.weight(i, j)).sum::<f64>())
        .sum())
}

/// `2 f(X) + deleted edge weight`, an upper bound on the optimum.
pub fn posthoc_bound(result: &SolveResult, graph: &RedundancyGraph) -> Result<f64> {
    Ok(2.0 * result.value + deleted_edge_weight(graph, &result.dag)?)
}

/// Upper bounds on the optimum from residual gains given `s` (online) and
/// from singleton values (oblivious).
pub fn online_bounds<F: SetObjective>(f: &F, m: &SimplePartitionMatroid, s: &Selection) -> (f64, f64) {
    let state = f.state_of(s.as_slice());
    let empty = f.empty_state();
    let mut online = f.value(&state);
    let mut oblivious = 0.0;
    for i in 0..m.n_agents() {
        let mut best_residual = 0.0f64;
        let mut best_single = 0.0f64;
        for x in m.block(i) {
            if !s.contains(x) {
                best_residual = best_residual.max(f.gain(&state, x));
            }
            best_single = best_single.max(f.gain(&empty, x));
        }
        online += best_residual;
        oblivious += best_single;
    }
    (online, oblivious)
}

/// Excess suboptimality of a DSGA run: total gain decay between planning
/// and commit.
pub fn dsga_psi(trace: &[DsgaCommit]) -> f64 {
    trace.iter().map(|c| c.initial_gain - c.commit_gain).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub deleted_weight: f64,
    pub posthoc: f64,
    pub online: f64,
    pub oblivious: f64,
    /// `value / min(bounds)`, or 1 when every bound is zero.
    pub subopt_lb: f64,
}

impl BoundReport {
    pub const CSV_HEADER: [&'static str; 6] = ["value", "deleted_weight", "posthoc", "online", "oblivious", "subopt_lb"];

    pub fn min_upper_bound(&self) -> f64 {
        self.posthoc.min(self.online).min(self.oblivious)
    }
}

pub fn bound_report<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    result: &SolveResult,
    graph: &RedundancyGraph,
) -> Result<BoundReport> {
    let deleted = deleted_edge_weight(graph, &result.dag)?;
    let (online, oblivious) = online_bounds(f, m, &result.selection);
    let posthoc = 2.0 * result.value + deleted;
    let least = posthoc.min(online).min(oblivious);
    let subopt_lb = if least > 0.0 { (result.value / least).min(1.0) } else { 1.0 };
    Ok(BoundReport {
        value: result.value,
        deleted_weight: deleted,
        posthoc,
        online,
        oblivious,
        subopt_lb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::t1;
    use crate::objectives::ProbCoverageProblem;
    use crate::solvers::{dag_greedy, dsga_plan, myopic_plan, sequential_greedy};

    #[test]
    fn t1_weight() {
        let (f, m) = t1();
        assert_eq!(pairwise_weight(&f, &m, 0, 1).unwrap(), 2.0);
        assert_eq!(pairwise_weight(&f, &m, 1, 0).unwrap(), 2.0);
        assert!(pairwise_weight(&f, &m, 0, 0).is_err());
    }

    #[test]
    fn disjoint_and_duplicate_agents() {
        let f = ProbCoverageProblem::from_sparse(
            vec![1.0, 2.0],
            vec![vec![vec![(0, 0.0)]], vec![vec![(1, 0.0)]], vec![vec![(1, 0.0)]]],
        )
        .unwrap();
        let m = f.matroid();
        assert_eq!(pairwise_weight(&f, &m, 0, 1).unwrap(), 0.0);
        assert_eq!(pairwise_weight(&f, &m, 1, 2).unwrap(), 2.0);
        let g = redundancy_graph(&f, &m, Execution::Sequential);
        assert_eq!(g.total_weight(), 2.0);
        assert_eq!(g.row_sum(1), 2.0);
    }

    #[test]
    fn capacity_examples() {
        let g = capacity_graph(&[vec![2.0], vec![3.0]]);
        assert_eq!(g.weight(0, 1), 2.0);
        let h = capacity_graph(&[vec![0.0, 1.0], vec![4.0, 0.5]]);
        assert_eq!(h.weight(0, 1), 0.5);
    }

    #[test]
    fn capacity_rejects_wrong_decomposition() {
        let (f, m) = t1();
        let probes = vec![vec![GroundElement::new(0, 0)]];
        assert!(capacity_weights(&f, &[f.clone(), f.clone()], &m, &probes, Execution::Sequential).is_err());
        assert!(capacity_weights(&f, std::slice::from_ref(&f), &m, &probes, Execution::Sequential).is_ok());
    }

    #[test]
    fn deleted_edges() {
        let g = RedundancyGraph::from_matrix(vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 4.0],
            vec![2.0, 4.0, 0.0],
        ])
        .unwrap();
        let complete = PlannerDag::complete(vec![0, 1, 2]).unwrap();
        assert_eq!(deleted_edge_weight(&g, &complete).unwrap(), 0.0);
        assert_eq!(deleted_edge_weight(&g, &PlannerDag::empty(3)).unwrap(), 7.0);
        let rsp = PlannerDag::from_rounds(&[1, 1, 2]);
        assert_eq!(deleted_edge_weight(&g, &rsp).unwrap(), 1.0);
        assert!(deleted_edge_weight(&g, &PlannerDag::empty(2)).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(RedundancyGraph::from_matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(RedundancyGraph::from_matrix(vec![vec![1.0]]).is_err());
        assert!(RedundancyGraph::from_matrix(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).is_err());
    }

    #[test]
    fn t1_bounds() {
        let (f, m) = t1();
        let g = redundancy_graph(&f, &m, Execution::Sequential);
        let myopic = myopic_plan(&f, &m).unwrap();
        assert_eq!(myopic.value, 2.0);
        assert_eq!(posthoc_bound(&myopic, &g).unwrap(), 6.0);
        let seq = sequential_greedy(&f, &m, &[0, 1]).unwrap();
        assert_eq!(posthoc_bound(&seq, &g).unwrap(), 2.0 * seq.value);
        assert_eq!(online_bounds(&f, &m, &seq.selection), (3.0, 4.0));
        let r = bound_report(&f, &m, &seq, &g).unwrap();
        assert_eq!(r.subopt_lb, 1.0);
        let dag = dag_greedy(&f, &m, &PlannerDag::empty(2)).unwrap();
        assert_eq!(bound_report(&f, &m, &dag, &g).unwrap().deleted_weight, 2.0);
    }

    #[test]
    fn modular_online_bound_adds_best_residuals() {
        let f = ProbCoverageProblem::from_sparse(
            vec![1.0, 2.0, 3.0, 4.0],
            vec![vec![vec![(0, 0.0)], vec![(1, 0.0)]], vec![vec![(2, 0.0)], vec![(3, 0.0)]]],
        )
        .unwrap();
        let m = f.matroid();
        let first = Selection::from_elements([GroundElement::new(0, 0), GroundElement::new(1, 0)]).unwrap();
        // 4 from the selection plus residuals 2 and 4
        assert_eq!(online_bounds(&f, &m, &first), (10.0, 6.0));
    }

    #[test]
    fn psi_matches_trace() {
        let (f, m) = t1();
        let r = dsga_plan(&f, &m, 1).unwrap();
        assert_eq!(dsga_psi(r.dsga_trace.as_ref().unwrap()), r.psi.unwrap());
        assert_eq!(dsga_psi(&[]), 0.0);
    }
}
