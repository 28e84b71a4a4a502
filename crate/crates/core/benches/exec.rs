use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hva_core::capital::sweep_alpha;
use hva_core::oracle::OracleRun;
use hva_core::*;

fn model(horizon: usize) -> Model {
    let gamma = build_q_flat_family(horizon, 0.05).unwrap();
    Model::build(MarketSpec::from_gamma(gamma).unwrap()).unwrap()
}

fn oracle_replay(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle_replay");
    group.sample_size(10);
    for horizon in [12, 14, 16] {
        let m = model(horizon);
        for exec in [Exec::Sequential, Exec::Parallel] {
            group.bench_with_input(
                BenchmarkId::new(format!("{exec:?}"), horizon),
                &m,
                |b, m| b.iter(|| OracleRun::run(m, TraderType::NotSoBad, exec).unwrap()),
            );
        }
    }
    group.finish();
}

fn alpha_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("alpha_sweep");
    let m = model(20);
    let ledger = xva(&m, TraderType::NotSoBad).unwrap();
    let alphas: Vec<f64> = (0..64).map(|i| 0.6 + 0.006 * i as f64).collect();
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| sweep_alpha(&ledger, &alphas, 0.1, EsConvention::AcerbiTasche, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle_replay, alpha_sweep);
criterion_main!(benches);
