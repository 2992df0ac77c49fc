//! Drift assembly `B^N(t, x) = F(rho^N(t, x)) b^N(x)` and coupled
//! Euler-Maruyama ensembles.
//!
//! All levels of an ensemble are driven by the same Brownian path per
//! sample: the reference level uses the fine increments and every coarser
//! level the subsampled path. The scheme is evaluated in accumulated form
//! `X_i = (x0 + sum_{j<i} B(t_j, X_j) h) + W(t_i)`, which is the usual
//! recursion `X_{i+1} = X_i + B(t_i, X_i) h + dW_i` with the Brownian part
//! carried exactly: coupled levels agree bitwise when the drift vanishes.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpaceTimeField};
use crate::nonlinear::NonlinearF;
use crate::randproc::{brownian_from_rng, BrownianIncrements, SeedSpec};

pub trait Drift: Sync {
    /// Drift at `(t, x)` for `t` inside the horizon.
    fn eval(&self, t: f64, x: f64) -> f64;

    /// Horizon the drift is defined on, if it is restricted.
    fn horizon(&self) -> Option<f64> {
        None
    }

    /// A priori bound on `|B|`, if known.
    fn bound(&self) -> Option<f64> {
        None
    }
}

impl<F> Drift for F
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    fn eval(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// `B^N = F(rho^N) b^N` with `rho^N` read off a stored solution.
#[derive(Debug, Clone)]
pub struct DriftEvaluator {
    field: Arc<SpaceTimeField>,
    drift: Arc<GridFunction>,
    nonlinearity: NonlinearF,
}

impl DriftEvaluator {
    pub fn new(
        field: Arc<SpaceTimeField>,
        drift: Arc<GridFunction>,
        nonlinearity: NonlinearF,
    ) -> Result<Self> {
        if field.grid() != drift.grid() {
            return Err(Error::GridMismatch(
                "density field and b^N must share a grid".into(),
            ));
        }
        Ok(Self {
            field,
            drift,
            nonlinearity,
        })
    }

    pub fn field(&self) -> &SpaceTimeField {
        &self.field
    }

    pub fn drift(&self) -> &GridFunction {
        &self.drift
    }

    pub fn nonlinearity(&self) -> &NonlinearF {
        &self.nonlinearity
    }

    /// `F(rho(t, x)) b(x)`; zero off the grid.
    pub fn try_eval(&self, t: f64, x: f64) -> Result<f64> {
        let b = self.drift.interp(x);
        let rho = self.field.interp(t, x)?;
        Ok(self.nonlinearity.eval(rho) * b)
    }
}

impl Drift for DriftEvaluator {
    #[inline]
    fn eval(&self, t: f64, x: f64) -> f64 {
        let b = self.drift.interp(x);
        if b == 0.0 {
            return 0.0;
        }
        let t = t.clamp(0.0, self.field.horizon());
        let rho = self.field.interp(t, x).unwrap_or(0.0);
        self.nonlinearity.eval(rho) * b
    }

    fn horizon(&self) -> Option<f64> {
        Some(self.field.horizon())
    }

    fn bound(&self) -> Option<f64> {
        Some(self.nonlinearity.sup_abs() * self.drift.max_abs())
    }
}

pub fn drift_eval(d: &DriftEvaluator, t: f64, x: f64) -> Result<f64> {
    d.try_eval(t, x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub terminal: f64,
    pub max_abs_drift: f64,
}

/// Euler-Maruyama from `x0` to the horizon of `w`.
pub fn euler_path(x0: f64, drift: &dyn Drift, w: &BrownianIncrements) -> Result<PathOutcome> {
    if let Some(h) = drift.horizon() {
        if (h - w.horizon()).abs() > 1e-12 * h.max(1.0) {
            return Err(Error::param(
                "T",
                format!(
                    "Brownian horizon {} differs from drift horizon {h}",
                    w.horizon()
                ),
            ));
        }
    }
    let m = w.steps();
    let dt = w.dt();
    let path = w.path();
    let mut acc = 0.0;
    let mut x = x0 + path[0];
    let mut max_abs_drift = 0.0f64;
    for i in 0..m {
        let t = i as f64 * dt;
        let b = drift.eval(t, x);
        max_abs_drift = max_abs_drift.max(b.abs());
        acc += b * dt;
        x = (x0 + acc) + path[i + 1];
        if !x.is_finite() {
            return Err(Error::PathDiverged {
                path: 0,
                step: i,
                t: t + dt,
            });
        }
    }
    Ok(PathOutcome {
        terminal: x,
        max_abs_drift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub m: usize,
    pub smoothing: f64,
    pub terminal: Vec<f64>,
    /// Largest `|B|` evaluated on this level.
    pub max_abs_drift: f64,
}

/// A level of the hierarchy: step count, smoothing level used to build its
/// drift, and the drift itself.
#[derive(Clone, Copy)]
pub struct Level<'a> {
    pub m: usize,
    pub smoothing: f64,
    pub drift: &'a dyn Drift,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_paths: usize,
    pub master_seed: u64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub levels: Vec<LevelResult>,
    pub reference: LevelResult,
    pub config_echo: Option<ExperimentConfig>,
}

/// Run every level and the reference on shared per-path noise.
///
/// Path `p` draws its initial value and then `m_ref` fine increments from
/// stream `(master_seed, p)`.
pub fn simulate_ensemble(
    spec: &EnsembleSpec,
    levels: &[Level<'_>],
    reference: Level<'_>,
) -> Result<EnsembleResult> {
    if spec.n_paths == 0 {
        return Err(Error::param("n_paths", "need at least one path"));
    }
    let m_ref = reference.m;
    if let Some(l) = levels.iter().find(|l| l.m == 0 || m_ref % l.m != 0) {
        return Err(Error::param(
            "levels",
            format!("level m = {} does not divide m_ref = {m_ref}", l.m),
        ));
    }

    let per_path: Vec<Result<Vec<PathOutcome>>> = (0..spec.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = SeedSpec::new(spec.master_seed, p as u64).rng();
            let x0: f64 = rng.sample(StandardNormal);
            let fine = brownian_from_rng(&mut rng, m_ref, spec.horizon)?;
            let tag = |e: Error| match e {
                Error::PathDiverged { step, t, .. } => Error::PathDiverged { path: p, step, t },
                other => other,
            };
            let mut out = Vec::with_capacity(levels.len() + 1);
            out.push(euler_path(x0, reference.drift, &fine).map_err(tag)?);
            for l in levels {
                let w = fine.coarsen(m_ref / l.m)?;
                out.push(euler_path(x0, l.drift, &w).map_err(tag)?);
            }
            Ok(out)
        })
        .collect();

    let mut columns: Vec<LevelResult> = std::iter::once(&reference)
        .chain(levels)
        .map(|l| LevelResult {
            m: l.m,
            smoothing: l.smoothing,
            terminal: Vec::with_capacity(spec.n_paths),
            max_abs_drift: 0.0,
        })
        .collect();
    for outcome in per_path {
        for (col, o) in columns.iter_mut().zip(outcome?) {
            col.terminal.push(o.terminal);
            col.max_abs_drift = col.max_abs_drift.max(o.max_abs_drift);
        }
    }
    let reference = columns.remove(0);
    Ok(EnsembleResult {
        levels: columns,
        reference,
        config_echo: None,
    })
}

/// Single-column CSV of terminal values with a `value` header.
pub fn write_terminal_csv<W: std::io::Write>(terminal: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "value")?;
    for v in terminal {
        writeln!(w, "{v}")?;
    }
    Ok(())
}
