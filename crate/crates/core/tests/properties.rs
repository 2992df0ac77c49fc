use mvsde_core::analysis::{kolmogorov_survival, strong_error};
use mvsde_core::{
    brownian_increments, coarsen_increments, fit_rate, rate_limit, simulate_ensemble,
    theoretical_kappa, theoretical_rate, DriftEvaluator, EnsembleSpec, GridFunction, Level,
    NonlinearF, SeedSpec, SpaceTimeField, SpatialGrid,
};
use proptest::prelude::*;
use std::sync::Arc;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_below_limit_below_one_sixth(beta in 1e-3f64..0.499, frac in 0.01f64..0.99) {
        let lambda = frac * (0.5 - beta);
        let r = theoretical_rate(beta, lambda).unwrap();
        let lim = rate_limit(beta).unwrap();
        prop_assert!(r < lim);
        prop_assert!(lim < 1.0 / 6.0);
        prop_assert!(theoretical_kappa(beta, lambda).unwrap() < 1.0 / (1.0 + beta));
    }

    #[test]
    fn fit_rate_exact_on_power_laws(scale in 1e-6f64..1e3, rate in -1.0f64..2.0) {
        let points: Vec<(usize, f64)> = [16usize, 64, 256, 1024]
            .iter()
            .map(|&m| (m, scale * (m as f64).powf(-rate)))
            .collect();
        let fit = fit_rate(&points).unwrap();
        prop_assert!((fit.slope - rate).abs() < 1e-12);
    }

    #[test]
    fn series_truncation_is_harmless(lambda in 0.01f64..3.0) {
        let short = kolmogorov_survival(lambda, 1e-12, usize::MAX);
        let long = kolmogorov_survival(lambda, 0.0, 100);
        prop_assert!((short - long).abs() < 1e-10);
    }

    #[test]
    fn coarsening_telescopes(seed in any::<u64>(), a in 1usize..4, b in 1usize..4) {
        let (fa, fb) = (1usize << a, 1usize << b);
        let fine = brownian_increments(SeedSpec::new(seed, 0), 64 * fa * fb, 1.0).unwrap();
        let twice = coarsen_increments(&coarsen_increments(&fine, fa).unwrap(), fb).unwrap();
        prop_assert_eq!(twice, coarsen_increments(&fine, fa * fb).unwrap());
    }

    #[test]
    fn drift_stays_within_bound(seed in 0u64..1000, amp in 0.1f64..3.0) {
        let grid = SpatialGrid::new(-6.0, 6.0, 241).unwrap();
        let b = Arc::new(GridFunction::from_fn(grid, |x| amp * (1.7 * x).cos()).unwrap());
        let rho = GridFunction::from_fn(grid, |x| (-x * x / 2.0).exp()).unwrap();
        let field = Arc::new(SpaceTimeField::constant_in_time(&rho, 1.0).unwrap());
        let d = DriftEvaluator::new(field, b, NonlinearF::sine()).unwrap();
        let spec = EnsembleSpec { n_paths: 32, master_seed: seed, horizon: 1.0 };
        let lvl = |m| Level { m, smoothing: 1.0, drift: &d };
        let res = simulate_ensemble(&spec, &[lvl(64)], lvl(256)).unwrap();
        let bound = mvsde_core::Drift::bound(&d).unwrap();
        prop_assert!(res.reference.max_abs_drift <= bound);
        prop_assert!(res.levels[0].max_abs_drift <= bound);
    }

    #[test]
    fn zero_drift_couples_exactly(seed in any::<u64>()) {
        let zero = |_: f64, _: f64| 0.0;
        let spec = EnsembleSpec { n_paths: 16, master_seed: seed, horizon: 1.0 };
        let lvl = |m| Level { m, smoothing: 1.0, drift: &zero };
        let res = simulate_ensemble(&spec, &[lvl(8), lvl(64)], lvl(512)).unwrap();
        for l in &res.levels {
            prop_assert_eq!(strong_error(l, &res.reference).unwrap(), 0.0);
        }
    }
}
