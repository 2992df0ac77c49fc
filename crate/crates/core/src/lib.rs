//! Numerical toolkit for one-dimensional McKean-Vlasov SDEs whose drift is
//! `F(rho) b`, with `b` a distribution given as the derivative of a rough
//! path and `rho` the law density of the solution.
//!
//! The pipeline: mollify `b` with the heat kernel at level `N`
//! ([`mollifier`]), solve the regularised Fokker-Planck equation for
//! `rho^N` ([`fokker_planck`]), then run coupled Euler-Maruyama ensembles
//! with the drift `F(rho^N) b^N` ([`euler`]) and measure strong errors,
//! rates and goodness of fit ([`analysis`]).

pub mod analysis;
pub mod config;
pub mod dopri;
pub mod error;
pub mod euler;
pub mod fokker_planck;
pub mod grid;
pub mod mollifier;
pub mod nonlinear;
pub mod randproc;

pub use analysis::{
    fit_rate, hurst_estimate, ks_test, rate_limit, strong_error, theoretical_kappa,
    theoretical_rate, KsResult, RatePlan, RateReport,
};
pub use config::{parse_config, ConfigBuilder, DriftOverride, ExperimentConfig, Profile};
pub use error::{Error, Result};
pub use euler::{
    drift_eval, euler_path, simulate_ensemble, Drift, DriftEvaluator, EnsembleResult, EnsembleSpec,
    Level, LevelResult,
};
pub use fokker_planck::{density_cdf, solve_fp, total_mass, FpDiagnostics, FpSolverOptions};
pub use grid::{interp_space, interp_spacetime, GridFunction, SpaceTimeField, SpatialGrid};
pub use mollifier::{heat_kernel, heat_kernel_derivative, mollify_drift, MollifierSpec};
pub use nonlinear::NonlinearF;
pub use randproc::{
    brownian_increments, coarsen_increments, fbm_path, sample_initial, BrownianIncrements, FbmPath,
    SeedSpec,
};
