use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sigmafloor_core::ensembles::{EnsembleSpec, ScalarDistribution};
use sigmafloor_core::montecarlo::{bkappa_deviation_curve, sigma_samples};
use sigmafloor_core::par;

fn sigma(c: &mut Criterion) {
    let mut g = c.benchmark_group("sigma_samples");
    g.sample_size(10);
    for n in [10usize, 30] {
        let spec = EnsembleSpec::iid(n + 2, n, ScalarDistribution::gaussian(0.0, 1.0));
        g.bench_with_input(BenchmarkId::new("parallel", n), &spec, |b, s| b.iter(|| sigma_samples(s, 2000, 1).unwrap()));
        g.bench_with_input(BenchmarkId::new("sequential", n), &spec, |b, s| {
            b.iter(|| par::sequential(|| sigma_samples(s, 2000, 1).unwrap()))
        });
    }
    g.finish();
}

fn deviation(c: &mut Criterion) {
    let mut g = c.benchmark_group("bkappa_deviation");
    g.sample_size(10);
    let spec = EnsembleSpec::iid(5, 3, ScalarDistribution::gaussian(0.0, 1.0));
    let grid = [1.5, 2.0, 3.0];
    g.bench_function("parallel", |b| b.iter(|| bkappa_deviation_curve(&spec, &grid, 20_000, 2.0, 2.0, 1).unwrap()));
    g.bench_function("sequential", |b| {
        b.iter(|| par::sequential(|| bkappa_deviation_curve(&spec, &grid, 20_000, 2.0, 2.0, 1).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, sigma, deviation);
criterion_main!(benches);
