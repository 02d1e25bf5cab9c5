use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use submod_swarm::exec::Execution;
use submod_swarm::redundancy::redundancy_graph;
use submod_swarm::rng::stream;
use submod_swarm::scenarios::{gen_area_coverage, AreaCoverageParams};
use submod_swarm::solvers::{partition_plan, rsp_assign_rounds, RoundPolicy};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn planners(c: &mut Criterion) {
    let mut group = c.benchmark_group("area_coverage");
    group.sample_size(10);
    for n in [25, 50] {
        let sc = gen_area_coverage(n, &AreaCoverageParams::default(), &mut stream(1, &[n as u64])).unwrap();
        let (rounds, _) = rsp_assign_rounds(n, RoundPolicy::Fixed(4), None, &mut stream(2, &[n as u64])).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(format!("rsp4/{name}"), n), &n, |b, _| {
                b.iter(|| partition_plan(&sc.problem, &sc.matroid, &rounds, None, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("redundancy/{name}"), n), &n, |b, _| {
                b.iter(|| redundancy_graph(&sc.problem, &sc.matroid, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, planners);
criterion_main!(benches);
