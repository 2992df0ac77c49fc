use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use mvsde_core::fokker_planck::gaussian_density;
use mvsde_core::mollifier::MollifierSpec;
use mvsde_core::{
    fbm_path, mollify_drift, simulate_ensemble, solve_fp, EnsembleSpec, FpSolverOptions,
    GridFunction, Level, NonlinearF, SeedSpec, SpatialGrid,
};

fn paper_grid() -> SpatialGrid {
    SpatialGrid::new(-10.0, 10.0, 4001).unwrap()
}

fn bench_mollify(c: &mut Criterion) {
    let grid = paper_grid();
    let spec = MollifierSpec::new(64.0).unwrap();
    let wide = grid.extended(spec.support_nodes(grid.dx()));
    let h = GridFunction::new(
        wide,
        fbm_path(SeedSpec::new(1, 0), 0.75, wide.len(), wide.dx())
            .unwrap()
            .values,
    )
    .unwrap();
    c.bench_function("mollify_paper_grid_N64", |b| {
        b.iter(|| mollify_drift(black_box(&h), &grid, &spec).unwrap())
    });
}

fn bench_fbm(c: &mut Criterion) {
    c.bench_function("fbm_circulant_2^14", |b| {
        b.iter(|| fbm_path(SeedSpec::new(3, 0), black_box(0.7), 1 << 14, 1e-3).unwrap())
    });
}

fn bench_fp(c: &mut Criterion) {
    let grid = SpatialGrid::new(-8.0, 8.0, 401).unwrap();
    let rho0 = gaussian_density(grid, 0.0, 1.0);
    let b = GridFunction::from_fn(grid, |x| (3.0 * x).cos()).unwrap();
    let opts = FpSolverOptions {
        store_count: 65,
        ..FpSolverOptions::default()
    };
    let mut g = c.benchmark_group("fokker_planck");
    g.sample_size(10);
    g.bench_function("solve_401_nodes_T0.25", |bch| {
        bch.iter(|| solve_fp(&rho0, &b, &NonlinearF::sine(), 0.25, &opts).unwrap())
    });
    g.finish();
}

fn bench_ensemble(c: &mut Criterion) {
    let ou = |_: f64, x: f64| -x;
    let spec = EnsembleSpec {
        n_paths: 1000,
        master_seed: 5,
        horizon: 1.0,
    };
    let level = |m| Level {
        m,
        smoothing: 1.0,
        drift: &ou,
    };
    let mut g = c.benchmark_group("euler");
    g.sample_size(10);
    g.bench_function("ou_1000_paths_3_levels", |b| {
        b.iter(|| {
            simulate_ensemble(&spec, &[level(128), level(256), level(512)], level(2048)).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, bench_mollify, bench_fbm, bench_fp, bench_ensemble);
criterion_main!(benches);
