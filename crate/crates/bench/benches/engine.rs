use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use dyntriv::manifolds::random_point;
use dyntriv::{
    build_problem, Engine, EngineConfig, OptimizerKind, OptimizerState, ProblemName, ProblemSpec,
    RebasePeriod, TrivKind, Trivialization,
};

fn bench_steps(c: &mut Criterion) {
    let cases = [
        (ProblemName::Procrustes, 16, None, TrivKind::LieExp),
        (ProblemName::Procrustes, 16, None, TrivKind::Cayley),
        (ProblemName::Rayleigh, 50, None, TrivKind::RiemannianExp),
        (ProblemName::Brockett, 20, Some(4), TrivKind::RiemannianExp),
        (ProblemName::SpdRecovery, 10, None, TrivKind::RiemannianExp),
    ];
    let mut group = c.benchmark_group("engine_step");
    for (name, n, k, kind) in cases {
        let problem = build_problem(&ProblemSpec { name, n, k, seed: 7 }).unwrap();
        let triv = Trivialization::new(kind, problem.manifold).unwrap();
        let start = random_point(&problem.manifold, 8).unwrap();
        for period in [RebasePeriod::Every(1), RebasePeriod::Every(100)] {
            let id = BenchmarkId::new(format!("{name}/{kind}"), period.label());
            let mut engine = Engine::new(
                triv,
                start.clone(),
                OptimizerState::new(OptimizerKind::Adam, 1e-3).unwrap(),
                EngineConfig {
                    rebase: period,
                    trace_every: usize::MAX,
                    ..EngineConfig::default()
                },
            )
            .unwrap();
            group.bench_function(id, |b| b.iter(|| engine.step(&problem).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, bench_steps);
criterion_main!(benches);
