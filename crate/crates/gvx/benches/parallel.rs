use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gvx::coeffs::ModelParams;
use gvx::exec::Execution;
use gvx::oracle::mc_statistics;
use gvx::sumsq::{cdf_sumsq_many, EvalConfig, Representation};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sumsq_grid(c: &mut Criterion) {
    let p = ModelParams::new(1.5, 6).unwrap();
    let radii: Vec<f64> = (1..=64).map(|i| 0.1 * i as f64).collect();
    let mut g = c.benchmark_group("cdf_sumsq_many");
    g.sample_size(10);
    for (name, mode) in MODES {
        let cfg = EvalConfig {
            execution: mode,
            ..EvalConfig::default().with_representation(Representation::Mixture)
        };
        g.bench_with_input(BenchmarkId::new(name, radii.len()), &radii, |b, r| {
            b.iter(|| cdf_sumsq_many(p, r, &cfg).unwrap())
        });
    }
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let p = ModelParams::new(2.0, 10).unwrap();
    let samples = 200_000;
    let mut g = c.benchmark_group("mc_statistics");
    g.sample_size(10);
    for (name, mode) in MODES {
        g.bench_function(BenchmarkId::new(name, samples), |b| {
            b.iter(|| mc_statistics(p, samples, 7, mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sumsq_grid, monte_carlo);
criterion_main!(benches);
