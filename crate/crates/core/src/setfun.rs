//! Set functions over a partitioned ground set.
//!
//! A ground element is an `(agent, action)` pair. Agent `i` owns the block of
//! actions `0..blocks[i]`, and a simple partition matroid allows at most one
//! element per block. Objectives are evaluated incrementally through an
//! opaque state so that solvers can compute marginal gains without
//! re-evaluating the whole selection.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// One sensing action of one agent. Ordering is lexicographic in
/// `(agent, action)`, which is the tie-break used everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundElement {
    pub agent: usize,
    pub action: usize,
}

impl GroundElement {
    pub const fn new(agent: usize, action: usize) -> Self {
        GroundElement { agent, action }
    }
}

/// An ordered set of ground elements. Iteration follows insertion order,
/// which solvers use as decision order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    elements: Vec<GroundElement>,
}

impl Selection {
    pub fn new() -> Self {
        Selection::default()
    }

    /// Build from a list, rejecting duplicate elements.
    pub fn from_elements(elements: impl IntoIterator<Item = GroundElement>) -> Result<Self> {
        let mut s = Selection::new();
        for x in elements {
            s.push(x)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, x: GroundElement) -> Result<()> {
        if self.contains(x) {
            return invalid_arg(format!("element {x:?} already in selection"));
        }
        self.elements.push(x);
        Ok(())
    }

    pub fn contains(&self, x: GroundElement) -> bool {
        self.elements.contains(&x)
    }

    pub fn contains_agent(&self, agent: usize) -> bool {
        self.elements.iter().any(|x| x.agent == agent)
    }

    pub fn action_of(&self, agent: usize) -> Option<usize> {
        self.elements.iter().find(|x| x.agent == agent).map(|x| x.action)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundElement> {
        self.elements.iter()
    }

    pub fn as_slice(&self) -> &[GroundElement] {
        &self.elements
    }

    /// Elements in `(agent, action)` order, for order-insensitive comparison.
    pub fn sorted(&self) -> Vec<GroundElement> {
        let mut v = self.elements.clone();
        v.sort();
        v
    }

    /// A copy with `x` appended.
    pub fn with(&self, x: GroundElement) -> Result<Selection> {
        let mut s = self.clone();
        s.push(x)?;
        Ok(s)
    }
}

impl From<Selection> for Vec<GroundElement> {
    fn from(s: Selection) -> Self {
        s.elements
    }
}

/// Partition matroid with one element allowed per agent block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplePartitionMatroid {
    blocks: Vec<usize>,
}

impl SimplePartitionMatroid {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if let Some(i) = blocks.iter().position(|&b| b == 0) {
            return Err(Error::InvalidProblem(format!("block of agent {i} is empty")));
        }
        Ok(SimplePartitionMatroid { blocks })
    }

    /// `n_agents` blocks of `actions` each.
    pub fn uniform(n_agents: usize, actions: usize) -> Result<Self> {
        Self::new(vec![actions; n_agents])
    }

    pub fn n_agents(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_size(&self, agent: usize) -> usize {
        self.blocks[agent]
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn block(&self, agent: usize) -> impl Iterator<Item = GroundElement> {
        (0..self.blocks[agent]).map(move |a| GroundElement::new(agent, a))
    }

    pub fn check_element(&self, x: GroundElement) -> Result<()> {
        if x.agent >= self.blocks.len() || x.action >= self.blocks[x.agent] {
            return invalid_arg(format!("element {x:?} is outside the matroid"));
        }
        Ok(())
    }

    /// Number of bases, saturating.
    pub fn n_bases(&self) -> u128 {
        self.blocks
            .iter()
            .fold(1u128, |acc, &b| acc.saturating_mul(b as u128))
    }
}

/// A normalized set-function oracle with incremental evaluation.
///
/// Implementations must be safe for concurrent read-only use. Stochastic
/// objectives fix their noise stream at construction so that repeated
/// evaluations are identical.
pub trait SetObjective: Sync {
    type State: Clone + Send + Sync;

    fn empty_state(&self) -> Self::State;

    fn insert(&self, state: &mut Self::State, x: GroundElement);

    fn value(&self, state: &Self::State) -> f64;

    fn gain(&self, state: &Self::State, x: GroundElement) -> f64 {
        let mut next = state.clone();
        self.insert(&mut next, x);
        self.value(&next) - self.value(state)
    }

    /// Marginal gains for every action of `agent` given `state`, as seen by
    /// that agent's local oracle. Defaults to exact gains.
    fn local_gains(&self, state: &Self::State, agent: usize, n_actions: usize) -> Vec<f64> {
        (0..n_actions)
            .map(|a| self.gain(state, GroundElement::new(agent, a)))
            .collect()
    }

    /// Whether blocks of agents `a` and `b` can interact at all. Used only to
    /// skip provably zero redundancy computations.
    fn may_interact(&self, _a: usize, _b: usize) -> bool {
        true
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    /// Whether computed gains are exactly submodular, with no rounding, so
    /// that stale gains are valid upper bounds for lazy evaluation.
    fn exact_submodular(&self) -> bool {
        false
    }

    fn state_of(&self, elements: &[GroundElement]) -> Self::State {
        let mut s = self.empty_state();
        for &x in elements {
            self.insert(&mut s, x);
        }
        s
    }

    fn evaluate(&self, elements: &[GroundElement]) -> f64 {
        self.value(&self.state_of(elements))
    }
}

/// `f(x | base) = f(base + x) - f(base)`.
pub fn marginal_gain<F: SetObjective>(f: &F, x: GroundElement, base: &Selection) -> Result<f64> {
    if base.contains(x) {
        return invalid_arg(format!("element {x:?} already in base"));
    }
    Ok(f.gain(&f.state_of(base.as_slice()), x))
}

/// `f(a; b | base) = f(a, b, base) - f(a, base) - f(b, base) + f(base)`.
pub fn second_derivative<F: SetObjective>(
    f: &F,
    a: GroundElement,
    b: GroundElement,
    base: &Selection,
) -> Result<f64> {
    if a == b {
        return invalid_arg("second derivative needs distinct elements");
    }
    if base.contains(a) || base.contains(b) {
        return invalid_arg("second derivative arguments overlap the base");
    }
    let state = f.state_of(base.as_slice());
    let mut with_a = state.clone();
    f.insert(&mut with_a, a);
    Ok(f.gain(&with_a, b) - f.gain(&state, b))
}

/// Marginal gain of a set `y` given a set `x`: `f(y | x)`.
pub fn set_gain<F: SetObjective>(f: &F, y: &[GroundElement], x: &[GroundElement]) -> f64 {
    let base = f.state_of(x);
    let mut both = base.clone();
    for &e in y {
        f.insert(&mut both, e);
    }
    f.value(&both) - f.value(&base)
}

pub fn matroid_feasible(m: &SimplePartitionMatroid, s: &Selection) -> Result<bool> {
    let mut seen = vec![false; m.n_agents()];
    let mut ok = true;
    for &x in s.iter() {
        m.check_element(x)?;
        if seen[x.agent] {
            ok = false;
        }
        seen[x.agent] = true;
    }
    Ok(ok)
}

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Exhaustive maximization over all bases. Bases are visited in
/// lexicographic order and only a strictly better value replaces the
/// incumbent, so ties resolve to the lexicographically first basis.
pub fn brute_force_optimum<F: SetObjective>(
    f: &F,
    m: &SimplePartitionMatroid,
    cap: u128,
) -> Result<(Selection, f64)> {
    let size = m.n_bases();
    if size > cap {
        return Err(Error::TooLarge { size, cap });
    }
    let n = m.n_agents();
    let mut best: Option<(Vec<GroundElement>, f64)> = None;
    let mut stack = vec![f.empty_state()];
    let mut current: Vec<GroundElement> = Vec::with_capacity(n);
    let mut choice = vec![0usize; n];
    // iterative depth-first enumeration with one state per depth
    let mut depth = 0usize;
    loop {
        if depth == n {
            let v = f.value(&stack[n]);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((current.clone(), v));
            }
            // backtrack
            loop {
                if depth == 0 {
                    let (sel, v) = best.expect("at least one basis");
                    return Ok((Selection::from_elements(sel)?, v));
                }
                depth -= 1;
                current.pop();
                stack.pop();
                choice[depth] += 1;
                if choice[depth] < m.block_size(depth) {
                    break;
                }
                choice[depth] = 0;
            }
        }
        let x = GroundElement::new(depth, choice[depth]);
        let mut next = stack[depth].clone();
        f.insert(&mut next, x);
        stack.push(next);
        current.push(x);
        depth += 1;
    }
}
