//! Simulated communication: geometric graphs, message accounting and the
//! synchronous epoch emulator.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::geom::Point;
use crate::solvers::{SolveResult, SolverFamily};

/// Undirected graph over agents. Geometric graphs link pairs within `r_c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommGraph {
    positions: Vec<Point>,
    r_c: f64,
    adj: Vec<Vec<usize>>,
}

impl CommGraph {
    pub fn geometric(positions: Vec<Point>, r_c: f64) -> Result<Self> {
        if !(r_c > 0.0) {
            return invalid_arg(format!("communication range must be positive, got {r_c}"));
        }
        let n = positions.len();
        let adj = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i && positions[i].dist(&positions[j]) <= r_c)
                    .collect()
            })
            .collect();
        Ok(CommGraph { positions, r_c, adj })
    }

    /// Graph with explicit edges and no geometry.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return invalid_arg(format!("invalid edge ({a}, {b})"));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        Ok(CommGraph {
            positions: Vec::new(),
            r_c: f64::NAN,
            adj,
        })
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        CommGraph {
            positions: Vec::new(),
            r_c: f64::INFINITY,
            adj,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.adj.len()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn range(&self) -> f64 {
        self.r_c
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Breadth-first parents from `src`. Neighbors are visited in id order,
    /// so each node's parent is its lowest-id predecessor on a shortest path.
    fn bfs(&self, src: usize) -> (Vec<Option<usize>>, Vec<usize>) {
        let n = self.n_agents();
        let mut hops = vec![None; n];
        let mut parent = vec![usize::MAX; n];
        hops[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let h = hops[u].expect("queued nodes are reached");
            for &v in &self.adj[u] {
                if hops[v].is_none() {
                    hops[v] = Some(h + 1);
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        (hops, parent)
    }

    /// Hop counts from `src`; `None` for unreachable nodes.
    pub fn hops_from(&self, src: usize) -> Vec<Option<usize>> {
        self.bfs(src).0
    }

    /// Shortest path from `a` to `b` inclusive.
    pub fn shortest_path(&self, a: usize, b: usize) -> Option<Vec<usize>> {
        let (hops, parent) = self.bfs(a);
        hops[b]?;
        let mut path = vec![b];
        while *path.last().expect("non-empty") != a {
            path.push(parent[*path.last().expect("non-empty")]);
        }
        path.reverse();
        Some(path)
    }

    pub fn is_connected(&self) -> bool {
        self.n_agents() == 0 || self.hops_from(0).iter().all(Option::is_some)
    }

    pub fn diameter(&self) -> Option<usize> {
        (0..self.n_agents())
            .map(|i| self.hops_from(i).into_iter().collect::<Option<Vec<_>>>().map(|h| h.into_iter().max().unwrap_or(0)))
            .collect::<Option<Vec<_>>>()
            .map(|d| d.into_iter().max().unwrap_or(0))
    }
}

/// Positions whose `r_c` graph is connected: each new agent is placed
/// uniformly within `r_c` of a uniformly chosen existing agent, rejecting
/// points outside the unit square.
pub fn gen_connected_positions<R: Rng + ?Sized>(n: usize, r_c: f64, rng: &mut R) -> Result<Vec<Point>> {
    if !(r_c > 0.0) {
        return invalid_arg(format!("communication range must be positive, got {r_c}"));
    }
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return Ok(out);
    }
    out.push(Point::new(rng.random(), rng.random()));
    while out.len() < n {
        let anchor = out[rng.random_range(0..out.len())];
        let r = r_c * rng.random::<f64>().sqrt();
        let t = TAU * rng.random::<f64>();
        let p = Point::new(anchor.x + r * t.cos(), anchor.y + r * t.sin());
        if p.in_unit_square() && p.dist(&anchor) <= r_c {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageStats {
    /// Messages counted per hop.
    pub messages: u64,
    /// Decisions carried times hops.
    pub volume: u64,
    /// Longest chain of sequential transmissions.
    pub span: u64,
    /// Broadcasts no receiver uses (partition planners only).
    pub wasted: u64,
}

impl MessageStats {
    pub const CSV_HEADER: [&'static str; 4] = ["messages", "volume", "span", "wasted"];
}

fn hops(graph: &CommGraph, a: usize, b: usize) -> Result<u64> {
    match graph.hops_from(a)[b] {
        Some(h) => Ok(h as u64),
        None => invalid_arg(format!("agents {a} and {b} are not connected")),
    }
}

/// Message counts for a finished run.
///
/// - Sequential: each planner forwards every decision so far to the next
///   planner over a shortest path.
/// - Partition planners: one message per in-neighbor relation, which only
///   points from earlier rounds to later ones. Broadcasts to other
///   neighbors are reported as `wasted`.
/// - Auctions: every round, each agent sends its list to each neighbor.
pub fn account_solver_messages(result: &SolveResult, graph: &CommGraph) -> Result<MessageStats> {
    let n = result.dag.n_agents();
    if graph.n_agents() != n {
        return invalid_arg(format!("graph has {} agents, run has {n}", graph.n_agents()));
    }
    let mut stats = MessageStats::default();
    match &result.family {
        SolverFamily::Sequential => {
            let order = result.dag.agent_order();
            for (k, w) in order.windows(2).enumerate() {
                let h = hops(graph, w[0], w[1])?;
                stats.messages += h;
                stats.volume += (k as u64 + 1) * h;
                stats.span += h;
            }
        }
        SolverFamily::Partition => {
            let rounds = result
                .round_of_agent
                .as_ref()
                .ok_or_else(|| crate::Error::InvalidArgument("partition run without rounds".into()))?;
            for j in 0..n {
                for &i in result.dag.in_neighbors(j) {
                    let h = hops(graph, i, j)?;
                    stats.messages += h;
                    stats.volume += h;
                }
            }
            for i in 0..n {
                stats.wasted += graph.neighbors(i).iter().filter(|&&j| !result.dag.in_neighbors(j).contains(&i)).count() as u64;
            }
            let n_d = result.rounds_used.max(*rounds.iter().max().unwrap_or(&1));
            stats.span = n_d as u64 - 1;
        }
        SolverFamily::Auction { list_lengths } => {
            for round in list_lengths {
                for (i, &len) in round.iter().enumerate() {
                    let deg = graph.neighbors(i).len() as u64;
                    stats.messages += deg;
                    stats.volume += deg * len as u64;
                }
            }
            stats.span = list_lengths.len() as u64;
        }
        SolverFamily::Dsga | SolverFamily::Baseline => {
            return invalid_arg("no message model for this solver family");
        }
    }
    Ok(stats)
}

/// Delivery delay, in planning rounds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum LatencyModel {
    #[default]
    Instant,
    Fixed(f64),
}

impl LatencyModel {
    fn delay(&self) -> f64 {
        match *self {
            LatencyModel::Instant => 0.0,
            LatencyModel::Fixed(d) => d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub events: u64,
    pub accepted: u64,
    pub rate: f64,
    pub stderr: f64,
}

/// Emulate `epochs` synchronous planning epochs with all-to-all delivery.
///
/// Agent `i` plans during round `d_i` and broadcasts when that round ends.
/// A receiver accepts a decision only if it arrives before its own round
/// starts.
pub fn sync_epoch_sim<R: Rng + ?Sized>(
    n: usize,
    n_d: usize,
    epochs: usize,
    latency: LatencyModel,
    rng: &mut R,
) -> Result<AcceptanceStats> {
    if n_d == 0 {
        return invalid_arg("number of rounds must be at least 1");
    }
    let delay = latency.delay();
    if !(delay >= 0.0) {
        return invalid_arg(format!("latency must be non-negative, got {delay}"));
    }
    let mut events = 0u64;
    let mut accepted = 0u64;
    let mut d = vec![0usize; n];
    for _ in 0..epochs {
        for di in d.iter_mut() {
            *di = rng.random_range(1..=n_d);
        }
        for (i, &di) in d.iter().enumerate() {
            for (j, &dj) in d.iter().enumerate() {
                if i == j {
                    continue;
                }
                events += 1;
                // round r spans [r - 1, r)
                if di as f64 + delay <= (dj - 1) as f64 {
                    accepted += 1;
                }
            }
        }
    }
    let rate = if events > 0 { accepted as f64 / events as f64 } else { 0.0 };
    let stderr = if events > 0 { (rate * (1.0 - rate) / events as f64).sqrt() } else { 0.0 };
    Ok(AcceptanceStats {
        events,
        accepted,
        rate,
        stderr,
    })
}

/// `(1 - 1/n_d) / 2`.
pub fn nominal_acceptance_rate(n_d: usize) -> f64 {
    0.5 * (1.0 - 1.0 / n_d as f64)
}
