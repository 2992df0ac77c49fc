//! Method-of-lines solver for the regularised Fokker-Planck equation
//!
//! ```text
//! d/dt rho = 1/2 rho_xx - d/dx [ F~(rho) b^N ],   rho(0) = rho_0
//! ```
//!
//! on a fixed uniform grid. Interior nodes use the second-order central
//! Laplacian and a central difference of the nodal flux
//! `g_j = F~(rho_j) b_j`; the two boundary nodes are held at zero. Time
//! stepping is adaptive Dormand-Prince 5(4), landing on `store_count`
//! equispaced output times.
//!
//! Negative undershoots are kept as computed and only reported through
//! [`FpDiagnostics::min_value`].

use crate::dopri::{self, DopriOptions, OdeSystem};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpaceTimeField};
use crate::nonlinear::NonlinearF;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    DirichletZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpSolverOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    /// Stored slices including `t = 0` and `t = T`.
    pub store_count: usize,
    pub boundary: Boundary,
}

impl Default for FpSolverOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_step: 1e-2,
            store_count: (1 << 11) + 1,
            boundary: Boundary::DirichletZero,
        }
    }
}

impl FpSolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::param(
                "pde tolerances",
                "abs_tol and rel_tol must be positive",
            ));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::param("max_step", "must be positive"));
        }
        if self.store_count < 2 {
            return Err(Error::param("store_count", "need at least 2 stored slices"));
        }
        Ok(())
    }

    pub fn with_halved_tolerances(self) -> Self {
        Self {
            abs_tol: self.abs_tol / 2.0,
            rel_tol: self.rel_tol / 2.0,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpDiagnostics {
    /// Trapezoidal mass of each stored slice.
    pub mass_trace: Vec<f64>,
    pub min_value: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl FpDiagnostics {
    /// `max_t |mass(t) - target|`.
    pub fn max_mass_deviation(&self, target: f64) -> f64 {
        self.mass_trace
            .iter()
            .map(|m| (m - target).abs())
            .fold(0.0, f64::max)
    }
}

struct FpSystem<'a> {
    drift: &'a [f64],
    nonlinearity: &'a NonlinearF,
    inv_dx2_half: f64,
    inv_2dx: f64,
    flux: std::cell::RefCell<Vec<f64>>,
}

impl OdeSystem for FpSystem<'_> {
    fn dim(&self) -> usize {
        self.drift.len()
    }

    fn rhs(&self, _t: f64, rho: &[f64], out: &mut [f64]) {
        let n = rho.len();
        let mut flux = self.flux.borrow_mut();
        for ((g, &r), &b) in flux.iter_mut().zip(rho).zip(self.drift) {
            *g = self.nonlinearity.eval_tilde(r) * b;
        }
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let diffusion = (rho[i - 1] - 2.0 * rho[i] + rho[i + 1]) * self.inv_dx2_half;
            let advection = (flux[i + 1] - flux[i - 1]) * self.inv_2dx;
            out[i] = diffusion - advection;
        }
    }
}

/// Trapezoidal integral over the grid.
pub fn total_mass(f: &GridFunction) -> f64 {
    trapezoid(f.values(), f.grid().dx())
}

fn trapezoid(v: &[f64], dx: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    dx * (inner + 0.5 * (v[0] + v[v.len() - 1]))
}

/// Cumulative trapezoidal integral, made non-decreasing and scaled so the
/// last node is exactly 1.
pub fn density_cdf(f: &GridFunction) -> Result<GridFunction> {
    let mass = total_mass(f);
    if !(mass > 0.0) {
        return Err(Error::Degenerate(format!(
            "density has non-positive mass {mass}"
        )));
    }
    let v = f.values();
    let dx = f.grid().dx();
    let mut cdf = Vec::with_capacity(v.len());
    let mut acc = 0.0f64;
    let mut running = 0.0f64;
    cdf.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * dx * (w[0] + w[1]);
        running = running.max(acc);
        cdf.push(running);
    }
    let last = *cdf.last().unwrap();
    if !(last > 0.0) {
        return Err(Error::Degenerate(
            "cumulative mass never becomes positive".into(),
        ));
    }
    for c in cdf.iter_mut() {
        *c /= last;
    }
    *cdf.last_mut().unwrap() = 1.0;
    GridFunction::new(*f.grid(), cdf)
}

/// Solve the regularised Fokker-Planck equation on `[0, horizon]`.
pub fn solve_fp(
    rho0: &GridFunction,
    drift: &GridFunction,
    nonlinearity: &NonlinearF,
    horizon: f64,
    opts: &FpSolverOptions,
) -> Result<(SpaceTimeField, FpDiagnostics)> {
    opts.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::param(
            "T",
            format!("horizon must be positive, got {horizon}"),
        ));
    }
    if rho0.grid() != drift.grid() {
        return Err(Error::GridMismatch("rho0 and b^N must share a grid".into()));
    }
    let grid = *rho0.grid();
    let n = grid.len();
    if n < 3 {
        return Err(Error::param("n", "need at least one interior node"));
    }
    if rho0.values().iter().any(|&v| v < 0.0) {
        return Err(Error::param("rho0", "initial density must be nonnegative"));
    }
    let m0 = total_mass(rho0);
    if (m0 - 1.0).abs() > 1e-3 {
        return Err(Error::param(
            "rho0",
            format!("initial mass {m0} is not within 1e-3 of 1"),
        ));
    }

    let dx = grid.dx();
    let system = FpSystem {
        drift: drift.values(),
        nonlinearity,
        inv_dx2_half: 0.5 / (dx * dx),
        inv_2dx: 0.5 / dx,
        flux: std::cell::RefCell::new(vec![0.0; n]),
    };
    let mut y0 = rho0.values().to_vec();
    match opts.boundary {
        Boundary::DirichletZero => {
            y0[0] = 0.0;
            y0[n - 1] = 0.0;
        }
    }

    let slices = opts.store_count - 1;
    let times: Vec<f64> = (0..=slices)
        .map(|i| {
            if i == slices {
                horizon
            } else {
                horizon * i as f64 / slices as f64
            }
        })
        .collect();

    let mut values = Vec::with_capacity(times.len() * n);
    let mut mass_trace = Vec::with_capacity(times.len());
    let mut min_value = f64::INFINITY;
    let stats = dopri::integrate(
        &system,
        &y0,
        &times,
        &DopriOptions {
            abs_tol: opts.abs_tol,
            rel_tol: opts.rel_tol,
            max_step: opts.max_step,
        },
        |_, y| {
            values.extend_from_slice(y);
            mass_trace.push(trapezoid(y, dx));
            min_value = y.iter().copied().fold(min_value, f64::min);
        },
    )?;
    if values.iter().any(|v| !v.is_finite()) {
        let t = times[values.iter().position(|v| !v.is_finite()).unwrap() / n];
        return Err(Error::NonFiniteState { t });
    }
    let field = SpaceTimeField::new(grid, times, values)?;
    Ok((
        field,
        FpDiagnostics {
            mass_trace,
            min_value,
            accepted_steps: stats.accepted,
            rejected_steps: stats.rejected,
        },
    ))
}

/// Standard normal density sampled on a grid.
pub fn gaussian_density(grid: crate::grid::SpatialGrid, mean: f64, variance: f64) -> GridFunction {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt();
    GridFunction::from_fn(grid, |x| {
        norm * (-(x - mean).powi(2) / (2.0 * variance)).exp()
    })
    .expect("gaussian density is finite")
}
