//! Independent oracles for the solvers: closed-form laws and known
//! convergence orders.

use mvsde_core::analysis::strong_error;
use mvsde_core::fokker_planck::gaussian_density;
use mvsde_core::{
    fbm_path, fit_rate, hurst_estimate, ks_test, mollify_drift, simulate_ensemble, solve_fp,
    EnsembleSpec, FpSolverOptions, GridFunction, Level, MollifierSpec, NonlinearF, SeedSpec,
    SpatialGrid,
};
use statrs::distribution::{ContinuousCDF, Normal};

fn level(m: usize, drift: &dyn mvsde_core::Drift) -> Level<'_> {
    Level {
        m,
        smoothing: 1.0,
        drift,
    }
}

#[test]
fn ou_self_convergence_is_first_order() {
    let ou = |_: f64, x: f64| -x;
    let spec = EnsembleSpec {
        n_paths: 2000,
        master_seed: 11,
        horizon: 1.0,
    };
    let ms = [32, 64, 128, 256, 512];
    let levels: Vec<_> = ms.iter().map(|&m| level(m, &ou)).collect();
    let res = simulate_ensemble(&spec, &levels, level(2048, &ou)).unwrap();
    let points: Vec<(usize, f64)> = res
        .levels
        .iter()
        .map(|l| (l.m, strong_error(l, &res.reference).unwrap()))
        .collect();
    for w in points.windows(2) {
        assert!(w[1].1 < w[0].1);
    }
    let rate = fit_rate(&points).unwrap().slope;
    assert!((0.8..=1.2).contains(&rate), "rate {rate}");
}

#[test]
fn zero_drift_terminal_law_is_normal() {
    let zero = |_: f64, _: f64| 0.0;
    let spec = EnsembleSpec {
        n_paths: 5000,
        master_seed: 3,
        horizon: 1.0,
    };
    let res = simulate_ensemble(&spec, &[level(128, &zero)], level(1024, &zero)).unwrap();
    assert_eq!(strong_error(&res.levels[0], &res.reference).unwrap(), 0.0);
    let law = Normal::new(0.0, 2f64.sqrt()).unwrap();
    let grid = SpatialGrid::new(-10.0, 10.0, 4001).unwrap();
    let cdf = GridFunction::from_fn(grid, |x| law.cdf(x)).unwrap();
    let ks = ks_test(&res.reference.terminal, &cdf).unwrap();
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn heat_flow_with_zero_drift_on_coarse_grid() {
    let grid = SpatialGrid::new(-8.0, 8.0, 641).unwrap();
    let rho0 = gaussian_density(grid, 0.0, 1.0);
    let b = GridFunction::zeros(grid);
    let opts = FpSolverOptions {
        store_count: 17,
        ..FpSolverOptions::default()
    };
    let (field, diag) = solve_fp(&rho0, &b, &NonlinearF::sine(), 0.5, &opts).unwrap();
    let exact = gaussian_density(grid, 0.0, 1.5);
    let err = field
        .terminal()
        .values()
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // second-order stencil at dx = 0.025
    assert!(err < 5e-5, "sup error {err}");
    assert!(diag.max_mass_deviation(1.0) < 1e-6);
}

#[test]
fn drift_preserves_mass_and_positivity() {
    let grid = SpatialGrid::new(-8.0, 8.0, 641).unwrap();
    let rho0 = gaussian_density(grid, 0.0, 1.0);
    let b = GridFunction::from_fn(grid, |x| 2.0 * (3.0 * x).sin()).unwrap();
    let opts = FpSolverOptions {
        store_count: 9,
        ..FpSolverOptions::default()
    };
    let (field, diag) = solve_fp(&rho0, &b, &NonlinearF::sine(), 0.5, &opts).unwrap();
    assert!(diag.max_mass_deviation(1.0) < 1e-8);
    assert!(field.min_value() > -1e-6);
}

#[test]
fn mollified_fbm_smooths_more_at_small_n() {
    let grid = SpatialGrid::new(-10.0, 10.0, 4001).unwrap();
    let specs = [
        MollifierSpec::new(8.0).unwrap(),
        MollifierSpec::new(128.0).unwrap(),
    ];
    let margin = specs[0].support_nodes(grid.dx());
    let wide = grid.extended(margin);
    let h = GridFunction::new(
        wide,
        fbm_path(SeedSpec::new(5, 0), 0.6, wide.len(), wide.dx())
            .unwrap()
            .values,
    )
    .unwrap();
    let sd = |f: &GridFunction| {
        let v = f.values();
        let mu = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let smooth = mollify_drift(&h, &grid, &specs[0]).unwrap();
    let rough = mollify_drift(&h, &grid, &specs[1]).unwrap();
    assert!(sd(&rough) > sd(&smooth));
}

#[test]
fn hurst_recovered_across_range() {
    for target in [0.6, 0.75, 0.9] {
        let mean = (0..4)
            .map(|s| {
                hurst_estimate(&fbm_path(SeedSpec::new(77, s), target, 1 << 14, 1e-3).unwrap())
                    .unwrap()
            })
            .sum::<f64>()
            / 4.0;
        assert!((mean - target).abs() < 0.05, "H = {target}: {mean}");
    }
}
