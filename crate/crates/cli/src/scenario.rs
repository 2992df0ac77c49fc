//! Assembles the per-level models of an experiment: rough path `h`,
//! mollified drift `b^N`, the Fokker-Planck solution `rho^N` and the drift
//! `F(rho^N) b^N`.

use std::sync::Arc;

use mvsde_core::fokker_planck::gaussian_density;
use mvsde_core::mollifier::{mollify_drift, MollifierSpec};
use mvsde_core::randproc::{fbm_path, FbmConstruction, SeedSpec};
use mvsde_core::{
    Drift, DriftEvaluator, DriftOverride, ExperimentConfig, FpDiagnostics, GridFunction,
    NonlinearF, Result, SpaceTimeField, SpatialGrid,
};

const TAG_FBM: u64 = 0x0fb3;
const TAG_BROWNIAN: u64 = 0xb70c;

/// Master seed of the fBm path for a run; constant across runs when the
/// drift is fixed.
pub fn fbm_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    let run = if cfg.fixed_drift { 0 } else { run as u64 + 1 };
    SeedSpec::derive(cfg.seed, TAG_FBM.wrapping_add(run << 16))
}

/// Master seed of the Brownian drivers for a run.
pub fn brownian_seed(cfg: &ExperimentConfig, run: usize) -> u64 {
    SeedSpec::derive(cfg.seed, TAG_BROWNIAN.wrapping_add((run as u64) << 16))
}

/// Step counts and smoothing levels used by a configuration: the coarse
/// levels followed by the reference.
pub fn level_plan(cfg: &ExperimentConfig) -> Result<Vec<(usize, f64)>> {
    let n_ref = cfg.smoothing_level(cfg.m_ref)?;
    let mut plan = Vec::with_capacity(cfg.levels.len() + 1);
    for &m in &cfg.levels {
        let n = if cfg.per_level_density {
            cfg.smoothing_level(m)?
        } else {
            n_ref
        };
        plan.push((m, n));
    }
    plan.push((cfg.m_ref, n_ref));
    Ok(plan)
}

/// A rough function `h` sampled on the experiment grid widened by
/// `margin` nodes per side, built from an fBm path started at the left end.
#[derive(Debug, Clone)]
pub struct RoughPath {
    pub h: GridFunction,
    pub construction: FbmConstruction,
}

pub fn rough_path(
    cfg: &ExperimentConfig,
    grid: &SpatialGrid,
    margin: usize,
    run: usize,
) -> Result<RoughPath> {
    let wide = grid.extended(margin);
    let path = fbm_path(
        SeedSpec::new(fbm_seed(cfg, run), 0),
        cfg.hurst,
        wide.len(),
        wide.dx(),
    )?;
    Ok(RoughPath {
        h: GridFunction::new(wide, path.values)?,
        construction: path.construction,
    })
}

/// Kernel half-width in nodes needed for every smoothing level in `plan`.
pub fn margin_for(grid: &SpatialGrid, smoothing: impl IntoIterator<Item = f64>) -> Result<usize> {
    let mut margin = 0;
    for n in smoothing {
        margin = margin.max(MollifierSpec::new(n)?.support_nodes(grid.dx()));
    }
    Ok(margin)
}

/// Everything needed to simulate one level.
#[derive(Debug, Clone)]
pub struct LevelModel {
    pub m: usize,
    pub smoothing: f64,
    pub drift: LevelDrift,
    pub fp: Option<FpSolution>,
}

#[derive(Debug, Clone)]
pub struct FpSolution {
    pub b: Arc<GridFunction>,
    pub field: Arc<SpaceTimeField>,
    pub diagnostics: FpDiagnostics,
}

#[derive(Debug, Clone)]
pub enum LevelDrift {
    Model(DriftEvaluator),
    Constant(f64),
}

impl Drift for LevelDrift {
    #[inline]
    fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            LevelDrift::Model(d) => d.eval(t, x),
            LevelDrift::Constant(c) => *c,
        }
    }

    fn horizon(&self) -> Option<f64> {
        match self {
            LevelDrift::Model(d) => d.horizon(),
            LevelDrift::Constant(_) => None,
        }
    }

    fn bound(&self) -> Option<f64> {
        match self {
            LevelDrift::Model(d) => d.bound(),
            LevelDrift::Constant(c) => Some(c.abs()),
        }
    }
}

/// Mollify `h` at level `smoothing` and solve for `rho^N`.
pub fn solve_level(
    cfg: &ExperimentConfig,
    h: &GridFunction,
    nonlinearity: &NonlinearF,
    smoothing: f64,
) -> Result<FpSolution> {
    let grid = cfg.grid()?;
    let b = mollify_drift(h, &grid, &MollifierSpec::new(smoothing)?)?;
    solve_with_drift(cfg, b, nonlinearity)
}

fn solve_with_drift(
    cfg: &ExperimentConfig,
    b: GridFunction,
    nonlinearity: &NonlinearF,
) -> Result<FpSolution> {
    let rho0 = gaussian_density(*b.grid(), 0.0, 1.0);
    let (field, diagnostics) =
        mvsde_core::solve_fp(&rho0, &b, nonlinearity, cfg.horizon, &cfg.pde)?;
    Ok(FpSolution {
        b: Arc::new(b),
        field: Arc::new(field),
        diagnostics,
    })
}

/// The PDE counterpart of a drift override: `F = 1` with `b` constant.
fn override_solution(cfg: &ExperimentConfig, c: f64) -> Result<FpSolution> {
    let grid = cfg.grid()?;
    let b = GridFunction::from_fn(grid, |_| c)?;
    solve_with_drift(cfg, b, &NonlinearF::Constant(1.0))
}

/// Build every level in `plan` for one nonlinearity.
///
/// With a drift override the Euler drift is the constant everywhere and,
/// when `with_pde` is set, the density is solved once for the reference.
pub fn build_levels(
    cfg: &ExperimentConfig,
    h: Option<&GridFunction>,
    nonlinearity: &NonlinearF,
    plan: &[(usize, f64)],
    with_pde: bool,
) -> Result<Vec<LevelModel>> {
    let constant = match cfg.drift_override {
        DriftOverride::None => None,
        DriftOverride::Zero => Some(0.0),
        DriftOverride::Constant(c) => Some(c),
    };
    if let Some(c) = constant {
        let fp = if with_pde {
            Some(override_solution(cfg, c)?)
        } else {
            None
        };
        let last = plan.len() - 1;
        return Ok(plan
            .iter()
            .enumerate()
            .map(|(i, &(m, smoothing))| LevelModel {
                m,
                smoothing,
                drift: LevelDrift::Constant(c),
                fp: if i == last { fp.clone() } else { None },
            })
            .collect());
    }
    let h = h.expect("a rough path is required without a drift override");
    let mut solved: Vec<(f64, FpSolution)> = Vec::new();
    let mut out = Vec::with_capacity(plan.len());
    for &(m, smoothing) in plan {
        let fp = match solved.iter().find(|(n, _)| *n == smoothing) {
            Some((_, fp)) => fp.clone(),
            None => {
                let fp = solve_level(cfg, h, nonlinearity, smoothing)?;
                solved.push((smoothing, fp.clone()));
                fp
            }
        };
        let evaluator = DriftEvaluator::new(fp.field.clone(), fp.b.clone(), nonlinearity.clone())?;
        out.push(LevelModel {
            m,
            smoothing,
            drift: LevelDrift::Model(evaluator),
            fp: Some(fp),
        });
    }
    Ok(out)
}

/// File-system friendly name of a nonlinearity.
pub fn slug(f: &NonlinearF) -> String {
    f.to_string()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
