use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use divband::bands::two_band_from;
use divband::barrier::optimal_barrier;
use divband::simulate::{estimate_value_with, SimConfig, StrategySpec};
use divband::verify::{certify, CertifyOptions};
use divband::wsolve::solve_w;
use divband::{ClaimDist, Execution, Grid, ModelParams};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let p = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
    let d = ClaimDist::exponential(1.0).unwrap();
    let ws = solve_w(&p, &d, Grid::new(30.0, 1e-3).unwrap()).unwrap();
    let spec = StrategySpec::from_candidate(&optimal_barrier(&ws).unwrap()).unwrap();
    let cfg = SimConfig { dt: 1e-2, t_max: 10.0 };
    let mut group = c.benchmark_group("estimate_value");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| estimate_value_with(mode, &spec, black_box(2.0), &p, &d, 2_000, cfg, 1).unwrap())
        });
    }
    group.finish();
}

fn band_scan(c: &mut Criterion) {
    let p = ModelParams::new(1.6, 1.0, 0.3, 0.2, 1.0);
    let d = ClaimDist::piecewise_uniform(0.7, 1.0).unwrap();
    let ws = solve_w(&p, &d, Grid::new(24.0, 1e-3).unwrap()).unwrap();
    let mut group = c.benchmark_group("two_band_scan");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| two_band_from(black_box(&ws), mode).unwrap())
        });
    }
    group.finish();
}

fn certification(c: &mut Criterion) {
    let p = ModelParams::new(4.0, 1.0, 0.5, 0.3, 2.0);
    let d = ClaimDist::exponential(1.0).unwrap();
    let ws = solve_w(&p, &d, Grid::new(30.0, 1e-3).unwrap()).unwrap();
    let v = optimal_barrier(&ws).unwrap();
    let mut group = c.benchmark_group("certify");
    group.sample_size(10);
    for (name, mode) in MODES {
        let opts = CertifyOptions { execution: mode, ..CertifyOptions::for_candidate(&p, &v) };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, &opts| {
            b.iter(|| certify(black_box(&v), &p, &d, opts))
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, band_scan, certification);
criterion_main!(benches);
