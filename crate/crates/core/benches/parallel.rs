use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oukl_core::harnack::QuadraticField;
use oukl_core::ou::{self, Ball, OUModel, PathPlan};
use oukl_core::{mvf, onion, DriftModel, Execution, GroupPoint, OnionSpec, QuadratureConfig};

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn mean_value(c: &mut Criterion) {
    let m = DriftModel::rotation(1.0);
    let spec = OnionSpec::new(GroupPoint::origin(2), 1.0, 5, m).unwrap();
    let u = QuadraticField { dim: 2, shift: 1.0 };
    let mut g = c.benchmark_group("mean_value");
    g.sample_size(10);
    for exec in MODES {
        let grid = QuadratureConfig::grid(100, 10_000).with_execution(exec);
        g.bench_with_input(BenchmarkId::new("grid", format!("{exec:?}")), &grid, |b, cfg| {
            b.iter(|| black_box(mvf::mean_value(&u, &spec, cfg).unwrap()))
        });
        let mc = QuadratureConfig::monte_carlo(100, 5_000, 1).with_execution(exec);
        g.bench_with_input(BenchmarkId::new("monte_carlo", format!("{exec:?}")), &mc, |b, cfg| {
            b.iter(|| black_box(mvf::mean_value(&u, &spec, cfg).unwrap()))
        });
    }
    g.finish();
}

fn hitting(c: &mut Criterion) {
    let m = OUModel::new(DriftModel::zero(3));
    let ball = Ball::new(vec![0.0; 3], 1.0).unwrap();
    let mut g = c.benchmark_group("hitting_probability");
    g.sample_size(10);
    for exec in MODES {
        let plan = PathPlan { n_paths: 1_000, step: 1e-3, horizon: 50.0, seed: 1, execution: exec };
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &plan, |b, plan| {
            b.iter(|| black_box(ou::hitting_probability(&m, &[2.0, 0.0, 0.0], &ball, plan).unwrap()))
        });
    }
    g.finish();
}

fn theta_sweep(c: &mut Criterion) {
    let m = DriftModel::rotation(1.0);
    let mut g = c.benchmark_group("two_onion_sweep");
    g.sample_size(10);
    for exec in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| black_box(onion::two_onion_sweep(&[0.1, 1.0, 10.0], &m, 5, 16, 1, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, mean_value, hitting, theta_sweep);
criterion_main!(benches);
