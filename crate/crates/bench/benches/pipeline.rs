use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fifdim_bench::builtin;
use fifdim_core::dimension::boxcount_dimension;
use fifdim_core::engine::{grid_values, sample_graph};
use fifdim_core::matrices::{build_matrices, rho_sequence, DEFAULT_TOL};
use fifdim_core::oscillation::divergence_check;

fn engine(c: &mut Criterion) {
    let m = builtin("example61");
    c.bench_function("grid level 10", |b| b.iter(|| grid_values(&m, black_box(10)).unwrap()));
}

fn matrices(c: &mut Criterion) {
    let m = builtin("example61");
    c.bench_function("build matrices k=6", |b| b.iter(|| build_matrices(&m, black_box(6)).unwrap()));
    let (upper, _) = build_matrices(&m, 8).unwrap();
    c.bench_function("spectral radius k=8", |b| b.iter(|| upper.spectral_radius(black_box(DEFAULT_TOL))));
    let mut g = c.benchmark_group("tables");
    g.sample_size(10);
    g.bench_function("radius table k<=8", |b| b.iter(|| rho_sequence(&m, 8, DEFAULT_TOL).unwrap()));
    g.bench_function("divergence check k<=8", |b| b.iter(|| divergence_check(&m, 8).unwrap()));
    g.finish();
}

fn boxcount(c: &mut Criterion) {
    let m = builtin("weierstrass");
    let samples = sample_graph(&m, 11).unwrap();
    c.bench_function("box count [4,9] at level 11", |b| {
        b.iter(|| boxcount_dimension(black_box(&samples), 3, [4, 9]).unwrap())
    });
}

criterion_group!(benches, engine, matrices, boxcount);
criterion_main!(benches);
