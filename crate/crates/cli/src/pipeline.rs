use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use mvsde_core::analysis::{strong_error, RateReport};
use mvsde_core::euler::write_terminal_csv;
use mvsde_core::mollifier::{mollify_drift, MollifierSpec};
use mvsde_core::randproc::FbmConstruction;
use mvsde_core::{
    density_cdf, fit_rate, ks_test, rate_limit, simulate_ensemble, DriftOverride, EnsembleSpec,
    ExperimentConfig, FpDiagnostics, FpSolverOptions, GridFunction, KsResult, Level, LevelResult,
    NonlinearF, SpaceTimeField,
};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::scenario::{self, build_levels, level_plan, margin_for, rough_path, slug, LevelModel};
use crate::{PipelineError, Result};

/// Largest tolerated `|mass - 1|` over the stored slices.
pub const MASS_GATE: f64 = 1e-4;
/// Smallest tolerated density value.
pub const POSITIVITY_GATE: f64 = -1e-3;
/// Errors below this on every level mean the scheme is exact for the drift.
pub const DEGENERATE_ERROR: f64 = 1e-12;

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let path = dir.join(name);
    let io = |source| PipelineError::Io {
        path: path.clone(),
        source,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
    body(&mut w).and_then(|_| w.flush()).map_err(io)
}

fn write_echo(dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
    write_file(dir, "config.toml", |w| {
        w.write_all(cfg.to_toml().as_bytes())
    })
}

pub fn check_gates(diag: &FpDiagnostics) -> Result<()> {
    let dev = diag.max_mass_deviation(1.0);
    if !(dev < MASS_GATE) {
        return Err(PipelineError::Gate(format!(
            "mass deviation {dev:e} exceeds {MASS_GATE:e}"
        )));
    }
    if !(diag.min_value > POSITIVITY_GATE) {
        return Err(PipelineError::Gate(format!(
            "density minimum {:e} below {POSITIVITY_GATE:e}",
            diag.min_value
        )));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------- drift-gen

#[derive(Debug, Clone)]
pub struct DriftGen {
    pub cfg: ExperimentConfig,
    /// `h` restricted to the experiment grid.
    pub h: GridFunction,
    /// `(N, b^N)` in increasing `N`.
    pub drifts: Vec<(f64, GridFunction)>,
    pub construction: FbmConstruction,
    pub margin: usize,
}

pub fn drift_gen(cfg: &ExperimentConfig) -> Result<DriftGen> {
    let grid = cfg.grid()?;
    let mut levels: Vec<f64> = cfg
        .levels
        .iter()
        .chain(std::iter::once(&cfg.m_ref))
        .map(|&m| cfg.smoothing_level(m))
        .collect::<mvsde_core::Result<_>>()?;
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let margin = margin_for(&grid, levels.iter().copied())?;
    let rough = rough_path(cfg, &grid, margin, 0)?;
    let drifts = levels
        .iter()
        .map(|&n| Ok((n, mollify_drift(&rough.h, &grid, &MollifierSpec::new(n)?)?)))
        .collect::<mvsde_core::Result<_>>()?;
    Ok(DriftGen {
        cfg: cfg.clone(),
        h: rough.h.restrict(&grid)?,
        drifts,
        construction: rough.construction,
        margin,
    })
}

impl DriftGen {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "drift.csv", |w| {
            write!(w, "x,h")?;
            for (n, _) in &self.drifts {
                write!(w, ",b_N{n}")?;
            }
            writeln!(w)?;
            for (i, x) in self.h.grid().nodes().enumerate() {
                write!(w, "{x},{}", self.h.values()[i])?;
                for (_, b) in &self.drifts {
                    write!(w, ",{}", b.values()[i])?;
                }
                writeln!(w)?;
            }
            Ok(())
        })?;
        write_file(dir, "drift_meta.txt", |w| {
            writeln!(w, "hurst = {}", self.cfg.hurst)?;
            writeln!(w, "construction = {:?}", self.construction)?;
            writeln!(w, "fbm_seed = {}", scenario::fbm_seed(&self.cfg, 0))?;
            writeln!(w, "margin_nodes = {}", self.margin)
        })?;
        write_echo(dir, &self.cfg)
    }
}

// ---------------------------------------------------------- density-compare

#[derive(Debug, Clone, PartialEq)]
pub struct KsRow {
    pub nonlinearity: String,
    /// What the samples were tested against.
    pub reference: String,
    pub result: KsResult,
}

#[derive(Debug, Clone)]
pub struct DensityCase {
    pub nonlinearity: NonlinearF,
    pub field: std::sync::Arc<SpaceTimeField>,
    pub diagnostics: FpDiagnostics,
    pub terminal: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DensityCompare {
    pub cfg: ExperimentConfig,
    pub cases: Vec<DensityCase>,
    pub ks: Vec<KsRow>,
}

fn normal_cdf_on(grid: &mvsde_core::SpatialGrid, variance: f64) -> Result<GridFunction> {
    let law = Normal::new(0.0, variance.sqrt())
        .map_err(|e| PipelineError::Gate(format!("analytic law: {e}")))?;
    Ok(GridFunction::from_fn(*grid, |x| law.cdf(x))?)
}

pub fn density_compare(cfg: &ExperimentConfig) -> Result<DensityCompare> {
    let grid = cfg.grid()?;
    let n_ref = cfg.smoothing_level(cfg.m_ref)?;
    let plan = [(cfg.m_ref, n_ref)];
    let h = match cfg.drift_override {
        DriftOverride::None => Some(rough_path(cfg, &grid, margin_for(&grid, [n_ref])?, 0)?.h),
        _ => None,
    };
    let spec = EnsembleSpec {
        n_paths: cfg.n_paths,
        master_seed: scenario::brownian_seed(cfg, 0),
        horizon: cfg.horizon,
    };
    let mut cases = Vec::new();
    let mut ks = Vec::new();
    for f in &cfg.nonlinearities {
        let model = build_levels(cfg, h.as_ref(), f, &plan, true)?.remove(0);
        let fp = model.fp.clone().expect("density solve requested");
        check_gates(&fp.diagnostics)?;
        let reference = Level {
            m: model.m,
            smoothing: model.smoothing,
            drift: &model.drift,
        };
        let terminal = simulate_ensemble(&spec, &[], reference)?.reference.terminal;
        let cdf = density_cdf(&fp.field.terminal())?;
        ks.push(KsRow {
            nonlinearity: f.to_string(),
            reference: "rho_T".into(),
            result: ks_test(&terminal, &cdf)?,
        });
        if cfg.drift_override == DriftOverride::Zero {
            let variance = 1.0 + cfg.horizon;
            ks.push(KsRow {
                nonlinearity: f.to_string(),
                reference: format!("normal:{variance}"),
                result: ks_test(&terminal, &normal_cdf_on(&grid, variance)?)?,
            });
        }
        cases.push(DensityCase {
            nonlinearity: f.clone(),
            field: fp.field,
            diagnostics: fp.diagnostics,
            terminal,
        });
    }
    Ok(DensityCompare {
        cfg: cfg.clone(),
        cases,
        ks,
    })
}

impl DensityCompare {
    pub fn write(&self, dir: &Path) -> Result<()> {
        for case in &self.cases {
            let sub = slug(&case.nonlinearity);
            write_file(dir, &format!("{sub}/rho_T.csv"), |w| {
                case.field.terminal().write_csv(w)
            })?;
            write_file(dir, &format!("{sub}/terminal_ref.csv"), |w| {
                write_terminal_csv(&case.terminal, w)
            })?;
            write_file(dir, &format!("{sub}/fp_diagnostics.txt"), |w| {
                let d = &case.diagnostics;
                writeln!(w, "max_mass_deviation = {}", d.max_mass_deviation(1.0))?;
                writeln!(w, "min_value = {}", d.min_value)?;
                writeln!(w, "accepted_steps = {}", d.accepted_steps)?;
                writeln!(w, "rejected_steps = {}", d.rejected_steps)
            })?;
            if self.cfg.write_field {
                write_file(dir, &format!("{sub}/field.csv"), |w| {
                    case.field.write_csv(w, "rho")
                })?;
            }
        }
        write_file(dir, "ks.csv", |w| {
            writeln!(w, "F,reference,statistic,p_value,n")?;
            for r in &self.ks {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.nonlinearity, r.reference, r.result.statistic, r.result.p_value, r.result.n
                )?;
            }
            Ok(())
        })?;
        write_echo(dir, &self.cfg)
    }
}

// --------------------------------------------------------------- rate-sweep

#[derive(Debug, Clone, PartialEq)]
pub struct RunRate {
    pub run: usize,
    pub nonlinearity: String,
    /// `(m, N(m), strong error)` per coarse level.
    pub errors: Vec<(usize, f64, f64)>,
    /// `None` when the run is degenerate.
    pub report: Option<RateReport>,
    /// Reference-level samples against `rho^N(T)`, when a density was solved.
    pub ks: Option<KsResult>,
}

impl RunRate {
    pub fn is_degenerate(&self) -> bool {
        self.report.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub nonlinearity: String,
    pub runs_used: usize,
    pub mean_rate: Option<f64>,
    /// Normal-approximation 95% half-width across runs.
    pub half_width: Option<f64>,
    pub theoretical_rate: f64,
    pub rate_limit: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone)]
pub struct RateSweep {
    pub cfg: ExperimentConfig,
    pub runs: Vec<RunRate>,
    pub summaries: Vec<SweepSummary>,
    /// Terminal samples of run 0 per nonlinearity: the coarse levels and the
    /// reference.
    pub first_run: Vec<(NonlinearF, Vec<LevelResult>, LevelResult)>,
}

fn as_level(lm: &LevelModel) -> Level<'_> {
    Level {
        m: lm.m,
        smoothing: lm.smoothing,
        drift: &lm.drift,
    }
}

fn run_levels(
    cfg: &ExperimentConfig,
    run: usize,
    f: &NonlinearF,
    models: &[LevelModel],
) -> Result<(RunRate, Vec<LevelResult>, LevelResult)> {
    let (reference, coarse) = models.split_last().expect("plan has a reference level");
    let spec = EnsembleSpec {
        n_paths: cfg.n_paths,
        master_seed: scenario::brownian_seed(cfg, run),
        horizon: cfg.horizon,
    };
    let levels: Vec<Level<'_>> = coarse.iter().map(as_level).collect();
    let ens = simulate_ensemble(&spec, &levels, as_level(reference))?;
    let errors = ens
        .levels
        .iter()
        .map(|l| Ok((l.m, l.smoothing, strong_error(l, &ens.reference)?)))
        .collect::<mvsde_core::Result<Vec<_>>>()?;
    let report = if errors.iter().all(|&(_, _, e)| e < DEGENERATE_ERROR) {
        None
    } else {
        let points: Vec<(usize, f64)> = errors.iter().map(|&(m, _, e)| (m, e)).collect();
        let mut r = fit_rate(&points)?;
        r.theoretical_rate = Some(cfg.rate_plan()?.theoretical_rate);
        Some(r)
    };
    let ks = match &reference.fp {
        Some(fp) => Some(ks_test(
            &ens.reference.terminal,
            &density_cdf(&fp.field.terminal())?,
        )?),
        None => None,
    };
    let rate = RunRate {
        run,
        nonlinearity: f.to_string(),
        errors,
        report,
        ks,
    };
    Ok((rate, ens.levels, ens.reference))
}

fn summarise(cfg: &ExperimentConfig, f: &NonlinearF, runs: &[RunRate]) -> Result<SweepSummary> {
    let plan = cfg.rate_plan()?;
    let rates: Vec<f64> = runs
        .iter()
        .filter(|r| r.nonlinearity == f.to_string())
        .filter_map(|r| r.report.as_ref().map(|rep| rep.slope))
        .collect();
    let k = rates.len();
    let mean = (k > 0).then(|| rates.iter().sum::<f64>() / k as f64);
    let half_width = match mean {
        Some(mu) if k > 1 => {
            let var = rates.iter().map(|r| (r - mu).powi(2)).sum::<f64>() / (k - 1) as f64;
            Some(1.96 * var.sqrt() / (k as f64).sqrt())
        }
        _ => None,
    };
    Ok(SweepSummary {
        nonlinearity: f.to_string(),
        runs_used: k,
        mean_rate: mean,
        half_width,
        theoretical_rate: plan.theoretical_rate,
        rate_limit: rate_limit(cfg.beta)?,
        kappa: plan.kappa,
    })
}

pub fn rate_sweep(cfg: &ExperimentConfig) -> Result<RateSweep> {
    if cfg.levels.len() < 2 {
        return Err(PipelineError::Config(mvsde_core::Error::Config {
            key: "levels".into(),
            reason: "a rate sweep needs at least two levels".into(),
        }));
    }
    let grid = cfg.grid()?;
    let plan = level_plan(cfg)?;
    let margin = margin_for(&grid, plan.iter().map(|&(_, n)| n))?;
    let needs_path = cfg.drift_override == DriftOverride::None;
    let mut cached: Option<Vec<Vec<LevelModel>>> = None;
    let mut runs = Vec::new();
    let mut first_run = Vec::new();

    for run in 0..cfg.n_runs {
        let tag = |e: PipelineError| PipelineError::Run {
            run,
            source: Box::new(e),
        };
        let models = match (&cached, cfg.fixed_drift) {
            (Some(m), true) => m.clone(),
            _ => {
                let h = if needs_path {
                    Some(
                        rough_path(cfg, &grid, margin, run)
                            .map_err(|e| tag(e.into()))?
                            .h,
                    )
                } else {
                    None
                };
                let per_f = cfg
                    .nonlinearities
                    .iter()
                    .map(|f| build_levels(cfg, h.as_ref(), f, &plan, needs_path))
                    .collect::<mvsde_core::Result<Vec<_>>>()
                    .map_err(|e| tag(e.into()))?;
                for lm in per_f.iter().flatten() {
                    if let Some(fp) = &lm.fp {
                        check_gates(&fp.diagnostics).map_err(tag)?;
                    }
                }
                if cfg.fixed_drift {
                    cached = Some(per_f.clone());
                }
                per_f
            }
        };
        for (f, levels) in cfg.nonlinearities.iter().zip(&models) {
            let (rate, coarse, reference) = run_levels(cfg, run, f, levels).map_err(tag)?;
            if run == 0 {
                first_run.push((f.clone(), coarse, reference));
            }
            runs.push(rate);
        }
    }
    let summaries = cfg
        .nonlinearities
        .iter()
        .map(|f| summarise(cfg, f, &runs))
        .collect::<Result<_>>()?;
    Ok(RateSweep {
        cfg: cfg.clone(),
        runs,
        summaries,
        first_run,
    })
}

impl RateSweep {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(dir, "errors.csv", |w| {
            writeln!(w, "run,F,m,N,strong_error")?;
            for r in &self.runs {
                for (m, n, e) in &r.errors {
                    writeln!(w, "{},{},{m},{n},{e}", r.run, r.nonlinearity)?;
                }
            }
            Ok(())
        })?;
        write_file(dir, "rates.csv", |w| {
            writeln!(
                w,
                "row,F,rate,intercept,half_width,theoretical_rate,rate_limit,kappa,status,ks_statistic,ks_p_value"
            )?;
            for r in &self.runs {
                let (rate, intercept) = match &r.report {
                    Some(rep) => (Some(rep.slope), Some(rep.intercept)),
                    None => (None, None),
                };
                let s = self
                    .summaries
                    .iter()
                    .find(|s| s.nonlinearity == r.nonlinearity);
                writeln!(
                    w,
                    "{},{},{},{},,{},{},{},{},{},{}",
                    r.run,
                    r.nonlinearity,
                    fmt_opt(rate),
                    fmt_opt(intercept),
                    fmt_opt(s.map(|s| s.theoretical_rate)),
                    fmt_opt(s.map(|s| s.rate_limit)),
                    fmt_opt(s.map(|s| s.kappa)),
                    if r.is_degenerate() {
                        "degenerate"
                    } else {
                        "ok"
                    },
                    fmt_opt(r.ks.map(|k| k.statistic)),
                    fmt_opt(r.ks.map(|k| k.p_value)),
                )?;
            }
            for s in &self.summaries {
                writeln!(
                    w,
                    "summary,{},{},,{},{},{},{},{},,",
                    s.nonlinearity,
                    fmt_opt(s.mean_rate),
                    fmt_opt(s.half_width),
                    s.theoretical_rate,
                    s.rate_limit,
                    s.kappa,
                    if s.runs_used == 0 { "degenerate" } else { "ok" },
                )?;
            }
            Ok(())
        })?;
        for (f, coarse, reference) in &self.first_run {
            let sub = slug(f);
            for l in coarse {
                write_file(dir, &format!("{sub}/terminal_m{}.csv", l.m), |w| {
                    write_terminal_csv(&l.terminal, w)
                })?;
            }
            write_file(dir, &format!("{sub}/terminal_ref.csv"), |w| {
                write_terminal_csv(&reference.terminal, w)
            })?;
        }
        write_echo(dir, &self.cfg)
    }
}

// -------------------------------------------------------- tolerance halving

#[derive(Debug, Clone, PartialEq)]
pub struct HalvingCheck {
    /// Diagnostics of the solve at the configured tolerances.
    pub diagnostics: FpDiagnostics,
    /// Sup-norm difference between the solutions at the configured and the
    /// halved tolerances, over every stored slice.
    pub sup_diff: f64,
    /// `5 (abs_tol + rel_tol sup|rho(T)|)` at the configured tolerances.
    pub bound: f64,
}

impl HalvingCheck {
    pub fn passes(&self) -> bool {
        self.sup_diff < self.bound
    }
}

/// Re-solve the reference-level density with halved tolerances.
pub fn halving_check(cfg: &ExperimentConfig, f: &NonlinearF) -> Result<HalvingCheck> {
    let grid = cfg.grid()?;
    let n_ref = cfg.smoothing_level(cfg.m_ref)?;
    let h = rough_path(cfg, &grid, margin_for(&grid, [n_ref])?, 0)?.h;
    let base = scenario::solve_level(cfg, &h, f, n_ref)?;
    let mut halved_cfg = cfg.clone();
    halved_cfg.pde = FpSolverOptions::with_halved_tolerances(cfg.pde);
    let halved = scenario::solve_level(&halved_cfg, &h, f, n_ref)?;
    let sup_diff = (0..base.field.times().len())
        .flat_map(|i| {
            let (a, b) = (base.field.row(i), halved.field.row(i));
            a.iter()
                .zip(b)
                .map(|(a, b)| (a - b).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0f64, f64::max);
    let sup_rho = base.field.terminal().max_abs();
    Ok(HalvingCheck {
        diagnostics: base.diagnostics,
        sup_diff,
        bound: 5.0 * (cfg.pde.abs_tol + cfg.pde.rel_tol * sup_rho),
    })
}
