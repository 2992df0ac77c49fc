//! Uniform 1D grids, functions sampled on them, and the piecewise-linear
//! interpolation used to evaluate drifts and densities off the nodes.
//!
//! Grid functions are extended by zero outside `[lo, hi]`.

use std::io::{self, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    lo: f64,
    hi: f64,
    n: usize,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::param(
                "lo/hi",
                format!("need lo < hi, got [{lo}, {hi}]"),
            ));
        }
        if n < 2 {
            return Err(Error::param("n", format!("need at least 2 nodes, got {n}")));
        }
        Ok(Self {
            lo,
            hi,
            n,
            dx: (hi - lo) / (n - 1) as f64,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Node `i`; the last node is pinned to `hi`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.node(i))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// The same spacing, widened by `margin` nodes on each side.
    pub fn extended(&self, margin: usize) -> SpatialGrid {
        let pad = margin as f64 * self.dx;
        SpatialGrid {
            lo: self.lo - pad,
            hi: self.hi + pad,
            n: self.n + 2 * margin,
            dx: self.dx,
        }
    }

    /// Offset (in nodes) of `inner` inside `self`, if both share the
    /// spacing and `inner` starts on one of our nodes.
    pub fn offset_of(&self, inner: &SpatialGrid) -> Option<usize> {
        if ((self.dx - inner.dx) / self.dx).abs() > 1e-9 {
            return None;
        }
        let s = (inner.lo - self.lo) / self.dx;
        let k = s.round();
        if k < 0.0 || (s - k).abs() > 1e-6 {
            return None;
        }
        let k = k as usize;
        (k + inner.n <= self.n).then_some(k)
    }

    /// Locate `x` for linear interpolation: `(left index, fraction)`.
    /// `None` outside the grid.
    #[inline]
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let s = (x - self.lo) / self.dx;
        let j = (s.floor() as usize).min(self.n - 2);
        Some((j, (s - j as f64).clamp(0.0, 1.0)))
    }
}

#[inline]
fn lerp_bounded(a: f64, b: f64, frac: f64) -> f64 {
    let v = a + frac * (b - a);
    v.clamp(a.min(b), a.max(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "values",
                format!("non-finite value at node {i}"),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Piecewise-linear interpolation, zero outside the grid.
    #[inline]
    pub fn interp(&self, x: f64) -> f64 {
        interp_row(&self.grid, &self.values, x)
    }

    /// Restrict to a sub-grid that is aligned with this one.
    pub fn restrict(&self, inner: &SpatialGrid) -> Result<GridFunction> {
        let k = self.grid.offset_of(inner).ok_or_else(|| {
            Error::GridMismatch("target grid is not aligned inside the source grid".into())
        })?;
        Ok(GridFunction {
            grid: *inner,
            values: self.values[k..k + inner.len()].to_vec(),
        })
    }

    /// Two-column CSV `x,value` with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,value")?;
        for (x, v) in self.grid.nodes().zip(&self.values) {
            writeln!(w, "{x},{v}")?;
        }
        Ok(())
    }
}

#[inline]
fn interp_row(grid: &SpatialGrid, values: &[f64], x: f64) -> f64 {
    let Some((j, frac)) = grid.locate(x) else {
        return 0.0;
    };
    if frac == 0.0 {
        return values[j];
    }
    if frac == 1.0 {
        return values[j + 1];
    }
    // exact node hits that landed one cell to the left after rounding
    let r = ((x - grid.lo) / grid.dx).round() as usize;
    if r < grid.n && grid.node(r) == x {
        return values[r];
    }
    lerp_bounded(values[j], values[j + 1], frac)
}

/// Free-function form of [`GridFunction::interp`].
pub fn interp_space(f: &GridFunction, x: f64) -> f64 {
    f.interp(x)
}

/// A function of `(t, x)` stored on `times × grid`, row-major by time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: SpatialGrid,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: SpatialGrid, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::param("times", "need at least two stored times"));
        }
        if times[0] != 0.0 {
            return Err(Error::param("times", "first stored time must be 0"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "times",
                "stored times must be strictly increasing",
            ));
        }
        if values.len() != times.len() * grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} times x {} nodes",
                values.len(),
                times.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid,
            times,
            values,
        })
    }

    /// A field that does not depend on time.
    pub fn constant_in_time(f: &GridFunction, horizon: f64) -> Result<Self> {
        let mut values = f.values.clone();
        values.extend_from_slice(&f.values);
        Self::new(f.grid, vec![0.0, horizon], values)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn slice(&self, i: usize) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.row(i).to_vec(),
        }
    }

    pub fn terminal(&self) -> GridFunction {
        self.slice(self.times.len() - 1)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear interpolation in `(t, x)`.
    ///
    /// `t` is clamped to `[0, T]` when it overshoots by at most one ulp of
    /// `T`; anything further out is an error.
    pub fn interp(&self, t: f64, x: f64) -> Result<f64> {
        let horizon = self.horizon();
        let tol = f64::EPSILON * horizon.max(1.0);
        if !(t >= -tol && t <= horizon + tol) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
        let t = t.clamp(0.0, horizon);
        let k = self.times.partition_point(|&s| s <= t);
        // times[k-1] <= t < times[k], or k == len when t == T
        if k == self.times.len() {
            return Ok(interp_row(&self.grid, self.row(k - 1), x));
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let a = interp_row(&self.grid, self.row(k - 1), x);
        if t == t0 {
            return Ok(a);
        }
        let b = interp_row(&self.grid, self.row(k), x);
        Ok(lerp_bounded(a, b, (t - t0) / (t1 - t0)))
    }

    /// Long-format CSV `t,x,<value_name>`.
    pub fn write_csv<W: Write>(&self, mut w: W, value_name: &str) -> io::Result<()> {
        writeln!(w, "t,x,{value_name}")?;
        for (i, t) in self.times.iter().enumerate() {
            for (x, v) in self.grid.nodes().zip(self.row(i)) {
                writeln!(w, "{t},{x},{v}")?;
            }
        }
        Ok(())
    }
}

/// Free-function form of [`SpaceTimeField::interp`].
pub fn interp_spacetime(field: &SpaceTimeField, t: f64, x: f64) -> Result<f64> {
    field.interp(t, x)
}
