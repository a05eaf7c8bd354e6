use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sync_ramsey::ramsey::{fit_fringe, run_ramsey, Backend};
use sync_ramsey::semiclassical::cumulant::lambda_semiclassical;
use sync_ramsey::trajectory::{max_dt, run_trajectory};
use sync_ramsey::ModelParams;

fn params(n: usize) -> ModelParams {
    let c = 0.2;
    ModelParams::new(n, 10.0, 1.0, 1.0, 0.5 * n as f64 * c, c)
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("ramsey");
    g.sample_size(10);
    let small = params(6);
    g.bench_function("dense N=6", |b| b.iter(|| run_ramsey(black_box(&small), Backend::Dense, 4.0, 201).unwrap()));
    g.bench_function("dicke N=6", |b| b.iter(|| run_ramsey(black_box(&small), Backend::Dicke, 4.0, 201).unwrap()));
    let big = params(50);
    g.bench_function("dicke N=50", |b| b.iter(|| run_ramsey(black_box(&big), Backend::Dicke, 4.0, 201).unwrap()));
    g.bench_function("cumulant N=50", |b| b.iter(|| run_ramsey(black_box(&big), Backend::Cumulant, 4.0, 201).unwrap()));
    g.finish();

    c.bench_function("steady-state lambda N=100", |b| b.iter(|| lambda_semiclassical(black_box(&params(100))).unwrap()));

    let series = run_ramsey(&small, Backend::Dicke, 6.0, 1201).unwrap();
    c.bench_function("fit 1201 samples", |b| b.iter(|| fit_fringe(black_box(&series), 1.0).unwrap()));

    let dt = max_dt(&small).unwrap();
    let mut g = c.benchmark_group("trajectory");
    g.sample_size(10);
    g.bench_function("single N=6 t=2", |b| b.iter(|| run_trajectory(black_box(&small), 2.0, dt, 1).unwrap()));
    g.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
