use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use vekua_bench::{constant_profile, disc_problem, gaussian, grid_for};
use vekua_core::{monodromy, pompeiu, SolverOptions, TOperator, TransformOptions};

fn bench_pompeiu(c: &mut Criterion) {
    let spec = disc_problem();
    let mut group = c.benchmark_group("pompeiu");
    group.sample_size(10);
    for n in [32, 64] {
        let grid = grid_for(&spec, n);
        let g = gaussian(&grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &g, |b, g| b.iter(|| pompeiu(black_box(g), &TransformOptions::default()).unwrap()));
    }
    group.finish();
}

fn bench_apply_t(c: &mut Criterion) {
    let spec = disc_problem();
    let mut group = c.benchmark_group("apply_T");
    group.sample_size(10);
    for n in [32, 64] {
        let grid = grid_for(&spec, n);
        let op = TOperator::from_spec(&spec, &grid, &SolverOptions::default().transform).unwrap();
        let u = gaussian(&grid);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| b.iter(|| op.apply(black_box(u)).unwrap()));
    }
    group.finish();
}

fn bench_monodromy(c: &mut Criterion) {
    let q = constant_profile(0.5);
    let mut group = c.benchmark_group("monodromy");
    for steps in [512, 2048] {
        group.bench_with_input(BenchmarkId::from_parameter(steps), &steps, |b, &steps| b.iter(|| monodromy(black_box(0.618), &q, steps)));
    }
    group.finish();
}

criterion_group!(benches, bench_pompeiu, bench_apply_t, bench_monodromy);
criterion_main!(benches);
