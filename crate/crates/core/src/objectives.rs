//! Concrete sensing objectives.
//!
//! [`ProbCoverageProblem`] is the expected value of detected events when each
//! action independently fails to detect event `e` with probability `p`.
//! [`AreaCoverageProblem`] is the covered fraction of a cell-center grid over
//! the unit square, which is the same objective with `p` in `{0, 1}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::setfun::{GroundElement, SetObjective, SimplePartitionMatroid};

/// Sensor detection model `exp(-d^2 / r_s^k)`. The default exponent is 4.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub radius_power: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        DetectionModel { radius_power: 4.0 }
    }
}

impl DetectionModel {
    pub fn success_prob(&self, distance: f64, r_s: f64) -> f64 {
        (-(distance * distance) / r_s.powf(self.radius_power)).exp()
    }
}

/// `exp(-distance^2 / r_s^4)`.
pub fn detection_success_prob(distance: f64, r_s: f64) -> f64 {
    DetectionModel::default().success_prob(distance, r_s)
}

/// Weighted probabilistic coverage over a fixed set of events.
///
/// Failure probabilities are stored sparsely per element; an event missing
/// from an element's list has failure probability 1.
#[derive(Clone, Debug)]
pub struct ProbCoverageProblem {
    values: Vec<f64>,
    event_positions: Vec<Point>,
    entries: Vec<Vec<Vec<(u32, f64)>>>,
    action_points: Vec<Vec<Point>>,
    touched: Vec<Vec<u64>>,
}

#[derive(Clone, Debug)]
pub struct CoverageState {
    survive: Vec<f64>,
    value: f64,
}

impl CoverageState {
    /// Probability that event `e` is still undetected.
    pub fn survive(&self, e: usize) -> f64 {
        self.survive[e]
    }
}

impl ProbCoverageProblem {
    /// Build from event values and sparse entries indexed `[agent][action]`.
    pub fn from_sparse(values: Vec<f64>, entries: Vec<Vec<Vec<(usize, f64)>>>) -> Result<Self> {
        let positions = vec![Point::new(0.0, 0.0); values.len()];
        let points = entries
            .iter()
            .map(|b| vec![Point::new(0.0, 0.0); b.len()])
            .collect();
        Self::build(values, positions, entries, points)
    }

    /// Build from events and a dense failure-probability function.
    pub fn new(
        events: &[(Point, f64)],
        action_points: Vec<Vec<Point>>,
        failure: impl Fn(GroundElement, usize) -> f64,
    ) -> Result<Self> {
        let entries = action_points
            .iter()
            .enumerate()
            .map(|(i, block)| {
                (0..block.len())
                    .map(|a| {
                        (0..events.len())
                            .map(|e| (e, failure(GroundElement::new(i, a), e)))
                            .filter(|&(_, p)| p < 1.0)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self::build(
            events.iter().map(|e| e.1).collect(),
            events.iter().map(|e| e.0).collect(),
            entries,
            action_points,
        )
    }

    /// Events detected by actions at `action_points` with probability
    /// `model.success_prob(distance, r_s)`.
    pub fn with_detection(
        events: &[(Point, f64)],
        action_points: Vec<Vec<Point>>,
        r_s: f64,
        model: DetectionModel,
    ) -> Result<Self> {
        if !(r_s > 0.0) {
            return Err(Error::InvalidArgument(format!("sensor radius {r_s} must be positive")));
        }
        let pts = action_points.clone();
        Self::new(events, action_points, |x, e| {
            1.0 - model.success_prob(pts[x.agent][x.action].dist(&events[e].0), r_s)
        })
    }

    fn build(
        values: Vec<f64>,
        event_positions: Vec<Point>,
        entries: Vec<Vec<Vec<(usize, f64)>>>,
        action_points: Vec<Vec<Point>>,
    ) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidProblem(format!("event value {v} must be finite and non-negative")));
        }
        let n_events = values.len();
        let words = n_events.div_ceil(64);
        let mut touched = Vec::with_capacity(entries.len());
        let mut packed = Vec::with_capacity(entries.len());
        for (i, block) in entries.into_iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidProblem(format!("block of agent {i} is empty")));
            }
            let mut mask = vec![0u64; words];
            let mut out = Vec::with_capacity(block.len());
            for list in block {
                let mut seen = vec![false; n_events];
                let mut row = Vec::with_capacity(list.len());
                for (e, p) in list {
                    if e >= n_events {
                        return Err(Error::InvalidProblem(format!("event index {e} out of range")));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::InvalidProblem(format!("failure probability {p} outside [0, 1]")));
                    }
                    if seen[e] {
                        return Err(Error::InvalidProblem(format!("event {e} listed twice for one action")));
                    }
                    seen[e] = true;
                    if p < 1.0 {
                        mask[e / 64] |= 1 << (e % 64);
                        row.push((e as u32, p));
                    }
                }
                out.push(row);
            }
            touched.push(mask);
            packed.push(out);
        }
        Ok(ProbCoverageProblem {
            values,
            event_positions,
            entries: packed,
            action_points,
            touched,
        })
    }

    pub fn n_events(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn event_positions(&self) -> &[Point] {
        &self.event_positions
    }

    pub fn action_point(&self, x: GroundElement) -> Point {
        self.action_points[x.agent][x.action]
    }

    pub fn blocks(&self) -> Vec<usize> {
        self.entries.iter().map(Vec::len).collect()
    }

    pub fn matroid(&self) -> SimplePartitionMatroid {
        SimplePartitionMatroid::new(self.blocks()).expect("blocks validated at construction")
    }

    /// Non-unit failure probabilities of one element.
    pub fn entries(&self, x: GroundElement) -> &[(u32, f64)] {
        &self.entries[x.agent][x.action]
    }

    /// Failure probability of element `x` on event `e`.
    pub fn failure_prob(&self, x: GroundElement, e: usize) -> f64 {
        self.entries(x)
            .iter()
            .find(|&&(k, _)| k as usize == e)
            .map_or(1.0, |&(_, p)| p)
    }

    /// Same problem with every event value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(k.is_finite() && k >= 0.0) {
            return Err(Error::InvalidArgument(format!("scale {k} must be finite and non-negative")));
        }
        out.values.iter_mut().for_each(|v| *v *= k);
        Ok(out)
    }
}

impl SetObjective for ProbCoverageProblem {
    type State = CoverageState;

    fn empty_state(&self) -> CoverageState {
        CoverageState {
            survive: vec![1.0; self.values.len()],
            value: 0.0,
        }
    }

    fn insert(&self, state: &mut CoverageState, x: GroundElement) {
        for &(e, p) in self.entries(x) {
            let q = &mut state.survive[e as usize];
            state.value += *q * (1.0 - p) * self.values[e as usize];
            *q *= p;
        }
    }

    fn value(&self, state: &CoverageState) -> f64 {
        state.value
    }

    fn gain(&self, state: &CoverageState, x: GroundElement) -> f64 {
        self.entries(x)
            .iter()
            .map(|&(e, p)| state.survive[e as usize] * (1.0 - p) * self.values[e as usize])
            .sum()
    }

    fn may_interact(&self, a: usize, b: usize) -> bool {
        self.touched[a]
            .iter()
            .zip(&self.touched[b])
            .any(|(x, y)| x & y != 0)
    }
}

/// Direct evaluation of `sum_e (1 - prod_x p_x^e) v_e`.
pub fn prob_coverage_value(p: &ProbCoverageProblem, s: &[GroundElement]) -> f64 {
    (0..p.n_events())
        .map(|e| {
            let miss: f64 = s.iter().map(|&x| p.failure_prob(x, e)).product();
            (1.0 - miss) * p.values[e]
        })
        .sum()
}

/// Coverage with the detection term inverted, `sum_e (prod_x (2 - p) - 1) v_e`.
/// This is supermodular and exists to exercise the property batteries.
#[derive(Clone, Debug)]
pub struct SignFlippedCoverage(pub ProbCoverageProblem);

impl SetObjective for SignFlippedCoverage {
    type State = Vec<f64>;

    fn empty_state(&self) -> Vec<f64> {
        vec![1.0; self.0.n_events()]
    }

    fn insert(&self, state: &mut Vec<f64>, x: GroundElement) {
        for &(e, p) in self.0.entries(x) {
            state[e as usize] *= 2.0 - p;
        }
    }

    fn value(&self, state: &Vec<f64>) -> f64 {
        state
            .iter()
            .zip(self.0.values())
            .map(|(q, v)| (q - 1.0) * v)
            .sum()
    }
}

pub const DEFAULT_GRID_RESOLUTION: usize = 512;

/// One row of a rasterized disk: cells `lo..=hi` of `row`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Span {
    row: u32,
    lo: u32,
    hi: u32,
}

/// Union-of-disks area inside the unit square, measured on a grid of cell
/// centers.
#[derive(Clone, Debug)]
pub struct AreaCoverageProblem {
    centers: Vec<Vec<Point>>,
    r_s: f64,
    resolution: usize,
    words_per_row: usize,
    spans: Vec<Vec<Vec<Span>>>,
}

#[derive(Clone, Debug)]
pub struct GridState {
    bits: Vec<u64>,
    covered: u64,
}

impl AreaCoverageProblem {
    pub fn new(centers: Vec<Vec<Point>>, r_s: f64, resolution: usize) -> Result<Self> {
        if !(r_s > 0.0 && r_s.is_finite()) {
            return Err(Error::InvalidProblem(format!("sensor radius {r_s} must be positive")));
        }
        if resolution == 0 {
            return Err(Error::InvalidProblem("grid resolution must be positive".into()));
        }
        for (i, block) in centers.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidProblem(format!("block of agent {i} is empty")));
            }
            if let Some(p) = block.iter().find(|p| !(p.x.is_finite() && p.y.is_finite())) {
                return Err(Error::InvalidProblem(format!("action center {p:?} is not finite")));
            }
        }
        let spans = centers
            .iter()
            .map(|b| b.iter().map(|c| rasterize(*c, r_s, resolution)).collect())
            .collect();
        Ok(AreaCoverageProblem {
            centers,
            r_s,
            resolution,
            words_per_row: resolution.div_ceil(64),
            spans,
        })
    }

    pub fn r_s(&self) -> f64 {
        self.r_s
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn n_cells(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn center(&self, x: GroundElement) -> Point {
        self.centers[x.agent][x.action]
    }

    pub fn centers(&self) -> &[Vec<Point>] {
        &self.centers
    }

    pub fn blocks(&self) -> Vec<usize> {
        self.centers.iter().map(Vec::len).collect()
    }

    pub fn matroid(&self) -> SimplePartitionMatroid {
        SimplePartitionMatroid::new(self.blocks()).expect("blocks validated at construction")
    }

    /// Row-major indices of the cells covered by `x`.
    pub fn covered_cells(&self, x: GroundElement) -> Vec<usize> {
        let n = self.resolution;
        self.spans[x.agent][x.action]
            .iter()
            .flat_map(|s| (s.lo..=s.hi).map(move |c| s.row as usize * n + c as usize))
            .collect()
    }

    /// The equivalent probabilistic coverage instance: one event per cell
    /// worth `1/cells`, detected with certainty by covering actions.
    pub fn as_prob_coverage(&self) -> Result<ProbCoverageProblem> {
        let cells = self.n_cells();
        let entries = self
            .centers
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (0..b.len())
                    .map(|a| {
                        self.covered_cells(GroundElement::new(i, a))
                            .into_iter()
                            .map(|c| (c, 0.0))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ProbCoverageProblem::from_sparse(vec![1.0 / cells as f64; cells], entries)
    }

    fn uncovered_in(&self, state: &GridState, x: GroundElement) -> u64 {
        let mut count = 0u64;
        for s in &self.spans[x.agent][x.action] {
            let base = s.row as usize * self.words_per_row;
            for_each_word(s.lo, s.hi, |w, mask| {
                count += u64::from((!state.bits[base + w] & mask).count_ones());
            });
        }
        count
    }
}

fn for_each_word(lo: u32, hi: u32, mut f: impl FnMut(usize, u64)) {
    let (lo, hi) = (lo as usize, hi as usize);
    let (wl, wh) = (lo / 64, hi / 64);
    for w in wl..=wh {
        let start = if w == wl { lo % 64 } else { 0 };
        let end = if w == wh { hi % 64 } else { 63 };
        let width = end - start + 1;
        let mask = if width == 64 { u64::MAX } else { ((1u64 << width) - 1) << start };
        f(w, mask);
    }
}

fn rasterize(c: Point, r: f64, n: usize) -> Vec<Span> {
    let nf = n as f64;
    let r2 = r * r;
    let coord = |k: i64| (k as f64 + 0.5) / nf;
    let inside = |row: i64, col: i64| {
        let dx = coord(col) - c.x;
        let dy = coord(row) - c.y;
        dx * dx + dy * dy <= r2
    };
    let last = n as i64 - 1;
    let row_lo = (((c.y - r) * nf - 0.5).floor() as i64).clamp(0, last);
    let row_hi = (((c.y + r) * nf - 0.5).ceil() as i64).clamp(0, last);
    let mut spans = Vec::new();
    for row in row_lo..=row_hi {
        let dy = coord(row) - c.y;
        let h2 = r2 - dy * dy;
        if h2 < 0.0 {
            continue;
        }
        let h = h2.sqrt();
        let mut lo = (((c.x - h) * nf - 0.5).ceil() as i64).clamp(0, last);
        let mut hi = (((c.x + h) * nf - 0.5).floor() as i64).clamp(0, last);
        // the estimate can be off by one cell either way near the boundary
        while lo > 0 && inside(row, lo - 1) {
            lo -= 1;
        }
        while lo <= hi && !inside(row, lo) {
            lo += 1;
        }
        while hi < last && inside(row, hi + 1) {
            hi += 1;
        }
        while hi >= lo && !inside(row, hi) {
            hi -= 1;
        }
        if lo <= hi {
            spans.push(Span {
                row: row as u32,
                lo: lo as u32,
                hi: hi as u32,
            });
        }
    }
    spans
}

impl SetObjective for AreaCoverageProblem {
    type State = GridState;

    fn empty_state(&self) -> GridState {
        GridState {
            bits: vec![0; self.words_per_row * self.resolution],
            covered: 0,
        }
    }

    fn insert(&self, state: &mut GridState, x: GroundElement) {
        for s in &self.spans[x.agent][x.action] {
            let base = s.row as usize * self.words_per_row;
            for_each_word(s.lo, s.hi, |w, mask| {
                let word = &mut state.bits[base + w];
                state.covered += u64::from((!*word & mask).count_ones());
                *word |= mask;
            });
        }
    }

    fn value(&self, state: &GridState) -> f64 {
        state.covered as f64 / self.n_cells() as f64
    }

    fn gain(&self, state: &GridState, x: GroundElement) -> f64 {
        self.uncovered_in(state, x) as f64 / self.n_cells() as f64
    }

    // gains are integer cell counts over a fixed denominator
    fn exact_submodular(&self) -> bool {
        true
    }

    fn may_interact(&self, a: usize, b: usize) -> bool {
        let reach = 2.0 * self.r_s + 2.0 / self.resolution as f64;
        self.centers[a]
            .iter()
            .any(|p| self.centers[b].iter().any(|q| p.dist(q) <= reach))
    }
}

/// Covered fraction of cell centers, computed directly.
pub fn area_coverage_value(p: &AreaCoverageProblem, s: &[GroundElement]) -> f64 {
    let n = p.resolution;
    let r2 = p.r_s * p.r_s;
    let mut covered = 0usize;
    for row in 0..n {
        let y = (row as f64 + 0.5) / n as f64;
        for col in 0..n {
            let c = Point::new((col as f64 + 0.5) / n as f64, y);
            if s.iter().any(|&x| p.center(x).dist2(&c) <= r2) {
                covered += 1;
            }
        }
    }
    covered as f64 / p.n_cells() as f64
}
