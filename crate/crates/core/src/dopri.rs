//! Dormand-Prince 5(4) integrator with PI step-size control for large
//! method-of-lines systems. Output times are hit exactly by shortening the
//! step that would cross them.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopriOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DopriStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const MAX_NAN_REJECTS: usize = 60;

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
}

fn rms_norm(v: &[f64], y: &[f64], opts: &DopriOptions) -> f64 {
    let s: f64 = v
        .iter()
        .zip(y)
        .map(|(e, y)| {
            let sc = opts.abs_tol + opts.rel_tol * y.abs();
            (e / sc).powi(2)
        })
        .sum();
    (s / v.len() as f64).sqrt()
}

fn initial_step<S: OdeSystem>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &DopriOptions,
) -> f64 {
    let d0 = rms_norm(y0, y0, opts);
    let d1 = rms_norm(f0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(opts.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = rms_norm(&diff, y0, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrate from `output_times[0]` through every later output time,
/// calling `observe(i, y)` at each (including `i = 0` with the initial
/// state).
pub fn integrate<S, O>(
    sys: &S,
    y0: &[f64],
    output_times: &[f64],
    opts: &DopriOptions,
    mut observe: O,
) -> Result<DopriStats>
where
    S: OdeSystem,
    O: FnMut(usize, &[f64]),
{
    let n = sys.dim();
    assert_eq!(y0.len(), n);
    assert!(!output_times.is_empty());
    let mut stats = DopriStats::default();
    let mut t = output_times[0];
    let mut y = y0.to_vec();
    observe(0, &y);
    if output_times.len() == 1 {
        return Ok(stats);
    }

    let mut w = Work {
        k: std::array::from_fn(|_| vec![0.0; n]),
        tmp: vec![0.0; n],
        y_new: vec![0.0; n],
    };
    sys.rhs(t, &y, &mut w.k[0]);
    stats.rhs_evals += 1;
    let mut h = initial_step(sys, t, &y, &w.k[0], opts);
    stats.rhs_evals += 1;
    let mut fac_old = 1e-4f64;
    let mut last_rejected = false;
    let mut nan_rejects = 0usize;

    for (idx, &t_out) in output_times.iter().enumerate().skip(1) {
        while t < t_out {
            let remaining = t_out - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let h_free = h;
            let h_step = if landing { remaining } else { h };
            if h_step <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t, h: h_step });
            }

            let err = step(sys, t, h_step, &y, &mut w, opts);
            stats.rhs_evals += 6;

            if !err.is_finite() {
                nan_rejects += 1;
                stats.rejected += 1;
                if nan_rejects > MAX_NAN_REJECTS {
                    return Err(Error::NonFiniteState { t });
                }
                h = h_step * FAC_MIN;
                last_rejected = true;
                continue;
            }
            nan_rejects = 0;

            let fac11 = err.powf(0.2 - PI_BETA * 0.75);
            if err <= 1.0 {
                let fac =
                    (fac11 / fac_old.powf(PI_BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = (h_step / fac).min(opts.max_step);
                if last_rejected {
                    h_new = h_new.min(h_step);
                }
                if landing {
                    h_new = h_new.max(h_free.min(opts.max_step));
                }
                fac_old = err.max(1e-4);
                stats.accepted += 1;
                t = if landing { t_out } else { t + h_step };
                std::mem::swap(&mut y, &mut w.y_new);
                // FSAL: the last stage is f(t + h, y_new)
                w.k.swap(0, 6);
                h = h_new;
                last_rejected = false;
            } else {
                stats.rejected += 1;
                h = h_step / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                last_rejected = true;
            }
        }
        observe(idx, &y);
    }
    Ok(stats)
}

/// One trial step; leaves the 5th-order solution in `w.y_new` and its
/// derivative in `w.k[6]`. Returns the scaled error norm.
fn step<S: OdeSystem>(
    sys: &S,
    t: f64,
    h: f64,
    y: &[f64],
    w: &mut Work,
    opts: &DopriOptions,
) -> f64 {
    let n = y.len();
    let [k1, k2, k3, k4, k5, k6, k7] = &mut w.k;
    let tmp = &mut w.tmp;

    for i in 0..n {
        tmp[i] = y[i] + h * A21 * k1[i];
    }
    sys.rhs(t + C2 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
    }
    sys.rhs(t + C3 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
    }
    sys.rhs(t + C4 * h, tmp, k4);
    for i in 0..n {
        tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
    }
    sys.rhs(t + C5 * h, tmp, k5);
    for i in 0..n {
        tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
    }
    sys.rhs(t + h, tmp, k6);
    let y_new = &mut w.y_new;
    for i in 0..n {
        y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
    }
    sys.rhs(t + h, y_new, k7);

    let mut acc = 0.0;
    for i in 0..n {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
        acc += (e / sc).powi(2);
    }
    (acc / n as f64).sqrt()
}
