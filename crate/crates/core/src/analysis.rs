//! Rate formulas for the `N(m) = m^kappa` coupling, empirical strong errors
//! and rates, the one-sample Kolmogorov-Smirnov test, and a Hurst estimator.

use crate::error::{Error, Result};
use crate::euler::LevelResult;
use crate::grid::GridFunction;
use crate::randproc::FbmPath;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::param(
            "beta",
            format!("must lie in (0, 1/2), got {beta}"),
        ));
    }
    Ok(())
}

fn check_beta_lambda(beta: f64, lambda: f64) -> Result<()> {
    check_beta(beta)?;
    if !(lambda > 0.0 && lambda < 0.5 - beta) {
        return Err(Error::param(
            "lambda",
            format!(
                "must lie in (0, 1/2 - beta) = (0, {}), got {lambda}",
                0.5 - beta
            ),
        ));
    }
    Ok(())
}

/// `kappa = 1 / ((1 + beta) + 2 (1/2 - beta - lambda)^2)`.
pub fn theoretical_kappa(beta: f64, lambda: f64) -> Result<f64> {
    check_beta_lambda(beta, lambda)?;
    let gap = 0.5 - beta - lambda;
    Ok(1.0 / ((1.0 + beta) + 2.0 * gap * gap))
}

/// Strong rate achieved with `N(m) = m^kappa`: `1/2 - kappa (1 + beta) / 2`.
pub fn theoretical_rate(beta: f64, lambda: f64) -> Result<f64> {
    let kappa = theoretical_kappa(beta, lambda)?;
    Ok(0.5 - 0.5 * (1.0 + beta) * kappa)
}

/// Supremum of [`theoretical_rate`] over `lambda`, attained as `lambda -> 0`.
pub fn rate_limit(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let gap = 0.5 - beta;
    Ok(0.5 - 0.5 * (1.0 + beta) / (1.0 + beta + 2.0 * gap * gap))
}

/// Smoothing level for `m` Euler steps, `round(m^kappa)`.
pub fn smoothing_level(m: usize, kappa: f64) -> f64 {
    (m as f64).powf(kappa).round().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePlan {
    pub beta: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub theoretical_rate: f64,
}

impl RatePlan {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        Ok(Self {
            beta,
            lambda,
            kappa: theoretical_kappa(beta, lambda)?,
            theoretical_rate: theoretical_rate(beta, lambda)?,
        })
    }

    pub fn smoothing_level(&self, m: usize) -> f64 {
        smoothing_level(m, self.kappa)
    }
}

/// Mean absolute difference of coupled terminal values.
pub fn strong_error(level: &LevelResult, reference: &LevelResult) -> Result<f64> {
    strong_error_samples(&level.terminal, &reference.terminal)
}

pub fn strong_error_samples(level: &[f64], reference: &[f64]) -> Result<f64> {
    if level.len() != reference.len() || level.is_empty() {
        return Err(Error::param(
            "terminal",
            format!(
                "path counts differ or are empty: {} vs {}",
                level.len(),
                reference.len()
            ),
        ));
    }
    let total: f64 = level
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / level.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `(m, strong error)` sorted by `m`.
    pub points: Vec<(usize, f64)>,
    /// Minus the log-log slope: error ~ m^(-slope).
    pub slope: f64,
    pub intercept: f64,
    pub theoretical_rate: Option<f64>,
}

/// OLS of `log10(error)` on `log10(m)`.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateReport> {
    if points.len() < 2 {
        return Err(Error::Degenerate(
            "need at least two (m, error) points".into(),
        ));
    }
    let mut pts = points.to_vec();
    pts.sort_by_key(|p| p.0);
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Degenerate("step counts must be distinct".into()));
    }
    if let Some(p) = pts
        .iter()
        .find(|p| !(p.1 > 0.0 && p.1.is_finite()) || p.0 == 0)
    {
        return Err(Error::Degenerate(format!("non-positive point {p:?}")));
    }
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).log10()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.log10()).collect();
    let (slope, intercept) = ols(&xs, &ys);
    Ok(RateReport {
        points: pts,
        slope: -slope,
        intercept,
        theoretical_rate: None,
    })
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test against a CDF tabulated on a grid.
///
/// The CDF is linearly interpolated inside its grid and taken as 0 to the
/// left and 1 to the right of it.
pub fn ks_test(samples: &[f64], cdf: &GridFunction) -> Result<KsResult> {
    let n = samples.len();
    if n < 8 {
        return Err(Error::param("samples", format!("need n >= 8, got {n}")));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::param("samples", format!("non-finite sample {x}")));
    }
    let g = cdf.grid();
    let eval = |x: f64| {
        if x < g.lo() {
            0.0
        } else if x > g.hi() {
            1.0
        } else {
            cdf.interp(x).clamp(0.0, 1.0)
        }
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = eval(x);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic,
        p_value: ks_p_value(statistic, n),
        n,
    })
}

/// Asymptotic Kolmogorov p-value with the finite-n scaling
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) * D`.
pub fn ks_p_value(statistic: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * statistic, 1e-12, usize::MAX)
}

/// `2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`, stopping once a term
/// falls below `term_tol` or after `max_terms` terms.
pub fn kolmogorov_survival(lambda: f64, term_tol: f64, max_terms: usize) -> f64 {
    if lambda <= 1e-3 {
        return 1.0;
    }
    let a = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut k = 1usize;
    while k <= max_terms {
        let term = (a * (k * k) as f64).exp();
        sum += sign * term;
        if term < term_tol {
            break;
        }
        sign = -sign;
        k += 1;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

const HURST_LAGS: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Slope of `log E[(B(t + k dt) - B(t))^2]` against `log(k dt)` over lags
/// 1..32 (powers of two), halved. The second moment is raw, not centred;
/// a path whose lag increments have no spread at all is rejected.
pub fn hurst_estimate(path: &FbmPath) -> Result<f64> {
    hurst_estimate_values(&path.values, path.dt)
}

pub fn hurst_estimate_values(values: &[f64], dt: f64) -> Result<f64> {
    if values.len() < 1 << 10 {
        return Err(Error::param(
            "path",
            format!("need at least 1024 points, got {}", values.len()),
        ));
    }
    let mut xs = Vec::with_capacity(HURST_LAGS.len());
    let mut ys = Vec::with_capacity(HURST_LAGS.len());
    for &k in &HURST_LAGS {
        let incs: Vec<f64> = values.windows(k + 1).map(|w| w[k] - w[0]).collect();
        let n = incs.len() as f64;
        let mean = incs.iter().sum::<f64>() / n;
        let spread = incs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        let scale = incs.iter().map(|d| d * d).sum::<f64>() / n;
        if !(spread > 1e-14 * scale) {
            return Err(Error::Degenerate(format!(
                "lag-{k} increments have zero variance"
            )));
        }
        xs.push((k as f64 * dt).ln());
        ys.push(scale.ln());
    }
    Ok(ols(&xs, &ys).0 / 2.0)
}
