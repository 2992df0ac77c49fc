//! Heat-kernel smoothing of a rough drift given as the derivative of a
//! sampled function: `b^N = h' * p_{1/N} = h * p'_{1/N}`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialGrid};

/// Kernel support half-width in standard deviations.
pub const DEFAULT_TRUNCATION_SIGMAS: f64 = 8.0;

pub fn heat_kernel(t: f64, z: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::param(
            "t",
            format!("heat kernel needs t > 0, got {t}"),
        ));
    }
    Ok(heat_kernel_unchecked(t, z))
}

#[inline]
fn heat_kernel_unchecked(t: f64, z: f64) -> f64 {
    (-z * z / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// `d/dz p_t(z) = -(z / t) p_t(z)`.
pub fn heat_kernel_derivative(t: f64, z: f64) -> Result<f64> {
    Ok(-(z / t) * heat_kernel(t, z)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvolutionMethod {
    #[default]
    Direct,
    Fft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    smoothing: f64,
    truncation_radius: f64,
    pub method: ConvolutionMethod,
}

impl MollifierSpec {
    /// Bandwidth `t = 1/N`, support `8 sqrt(t)`.
    pub fn new(smoothing: f64) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::param(
                "N",
                format!("smoothing level must be positive, got {smoothing}"),
            ));
        }
        Ok(Self {
            smoothing,
            truncation_radius: DEFAULT_TRUNCATION_SIGMAS / smoothing.sqrt(),
            method: ConvolutionMethod::Direct,
        })
    }

    /// Override the support half-width.
    pub fn with_truncation_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::param("truncation_radius", "must be positive"));
        }
        self.truncation_radius = radius;
        Ok(self)
    }

    pub fn with_method(mut self, method: ConvolutionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn bandwidth(&self) -> f64 {
        1.0 / self.smoothing
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// Kernel half-width in nodes at spacing `dx`.
    pub fn support_nodes(&self, dx: f64) -> usize {
        (self.truncation_radius / dx - 1e-9).ceil() as usize
    }

    /// Number of quadrature nodes across the kernel support at spacing `dx`.
    pub fn kernel_resolution(&self, dx: f64) -> usize {
        2 * self.support_nodes(dx) + 1
    }

    /// Trapezoidal weights `p'_t(k dx) dx` for `k = -K..=K`.
    fn derivative_weights(&self, dx: f64) -> Vec<f64> {
        let k = self.support_nodes(dx) as isize;
        let t = self.bandwidth();
        (-k..=k)
            .map(|j| {
                let z = j as f64 * dx;
                let w = if j.abs() == k { 0.5 } else { 1.0 };
                w * dx * (-(z / t) * heat_kernel_unchecked(t, z))
            })
            .collect()
    }
}

/// Smallest grid on which `h` must be sampled to produce `b^N` on `out`.
pub fn required_support(out: &SpatialGrid, spec: &MollifierSpec) -> SpatialGrid {
    out.extended(spec.support_nodes(out.dx()))
}

/// `b^N(x_i) = sum_j h(y_j) p'_{1/N}(x_i - y_j) dy` over the truncated
/// support, evaluated on `out`.
///
/// `h` must share the spacing of `out` and extend at least the kernel
/// half-width beyond it on both sides.
pub fn mollify_drift(
    h: &GridFunction,
    out: &SpatialGrid,
    spec: &MollifierSpec,
) -> Result<GridFunction> {
    let hg = h.grid();
    let offset = hg.offset_of(out).ok_or_else(|| {
        Error::GridMismatch("output grid must share spacing and nodes with the h grid".into())
    })?;
    let k = spec.support_nodes(out.dx());
    if offset < k || offset + out.len() + k > hg.len() {
        return Err(Error::InsufficientSupport(format!(
            "h covers [{}, {}] but the kernel needs [{}, {}]",
            hg.lo(),
            hg.hi(),
            out.lo() - k as f64 * out.dx(),
            out.hi() + k as f64 * out.dx()
        )));
    }
    let weights = spec.derivative_weights(out.dx());
    // window of h feeding the output, index j maps to y = x_{j-k}
    let window = &h.values()[offset - k..offset + out.len() + k];
    let values = match spec.method {
        ConvolutionMethod::Direct => direct_convolve(window, &weights, out.len()),
        ConvolutionMethod::Fft => fft_convolve(window, &weights, out.len()),
    };
    GridFunction::new(*out, values)
}

/// `out[i] = sum_j window[i + 2k - j] * weights[j]`, i.e. the kernel
/// offset `x_i - y` runs over `(j - k) dx`.
fn direct_convolve(window: &[f64], weights: &[f64], n_out: usize) -> Vec<f64> {
    let span = weights.len() - 1;
    (0..n_out)
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| window[i + span - j] * w)
                .sum()
        })
        .collect()
}

fn fft_convolve(window: &[f64], weights: &[f64], n_out: usize) -> Vec<f64> {
    let len = (window.len() + weights.len() - 1).next_power_of_two();
    let mut a: Vec<Complex<f64>> = window.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(len, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = weights.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(len, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    let span = weights.len() - 1;
    let scale = 1.0 / len as f64;
    (0..n_out).map(|i| a[i + span].re * scale).collect()
}
