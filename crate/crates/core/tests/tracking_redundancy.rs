use submod_swarm::exec::Execution;
use submod_swarm::rng::stream;
use submod_swarm::tracking::{
    range_measurement, target_step, tracking_weights, PlanningParams, TargetFilter, TrackingObjective, TrackingScenario,
};
use submod_swarm::{GroundElement, SetObjective};

fn spread_objective(n: usize, seed: u64, predicts: usize, n_samples: usize) -> TrackingObjective {
    let sc = TrackingScenario::random(n, seed).unwrap();
    let filters: Vec<TargetFilter> = sc
        .initial_filters()
        .into_iter()
        .map(|mut f| {
            for _ in 0..predicts {
                f.predict(&sc.world);
            }
            f
        })
        .collect();
    let params = PlanningParams {
        n_samples,
        horizon: sc.horizon,
        local_target_range: None,
    };
    TrackingObjective::new(sc.world, &sc.robots, &filters, params, seed).unwrap()
}

#[test]
fn capacity_matrix_matches_per_target_brute_max() {
    let f = spread_objective(8, 3, 2, 50);
    let m = f.matroid();
    let n = m.n_agents();
    let comps = f.components();
    // independent route: evaluate each singleton set rather than gains from
    // the empty state
    let cap: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            comps
                .iter()
                .map(|g| (0..m.block_size(i)).map(|a| g.evaluate(&[GroundElement::new(i, a)])).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    let w = tracking_weights(&f, Execution::Sequential);
    let mut nonzero = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let want: f64 = cap[i].iter().zip(&cap[j]).map(|(a, b)| a.min(*b)).sum();
            assert!((w.weight(i, j) - want).abs() <= 1e-9, "({i}, {j}): {} vs {want}", w.weight(i, j));
            nonzero += usize::from(want > 0.0);
        }
    }
    assert!(nonzero > 0);
}

/// Range-limited weights after ten measured steps with stationary robots.
fn tracked_weight_per_robot(n: usize) -> f64 {
    let sc = TrackingScenario::random(n, 17).unwrap();
    let mut filters = sc.initial_filters();
    let mut targets = sc.targets.clone();
    let mut rng = stream(17, &[1]);
    for _ in 0..10 {
        for t in targets.iter_mut() {
            *t = target_step(*t, &sc.world, &mut rng);
        }
        for (f, &t) in filters.iter_mut().zip(&targets) {
            let readings: Vec<(usize, f64)> =
                sc.robots.iter().map(|&r| (r, range_measurement(&sc.world, r, t, &mut rng))).collect();
            f.predict(&sc.world);
            f.update(&sc.world, &readings);
        }
    }
    let params = PlanningParams {
        n_samples: 20,
        horizon: sc.horizon,
        local_target_range: Some(sc.local_target_range),
    };
    let f = TrackingObjective::new(sc.world, &sc.robots, &filters, params, 17).unwrap();
    2.0 * tracking_weights(&f, Execution::default()).total_weight() / n as f64
}

#[test]
fn per_agent_redundancy_levels_off_with_team_size() {
    let (small, large) = (tracked_weight_per_robot(64), tracked_weight_per_robot(96));
    assert!(small > 0.0);
    assert!(large < 1.15 * small, "per-robot weight {small} at n=64, {large} at n=96");
}
