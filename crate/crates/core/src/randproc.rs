//! Reproducible random streams, Brownian paths and fractional Brownian
//! motion.
//!
//! Every generator is built from a [`SeedSpec`]: a ChaCha8 key expanded
//! from the master seed, with the 64-bit ChaCha stream selector set to the
//! stream id. Streams are therefore counter-based and independent of the
//! order in which workers consume them. Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat); bitwise reproducibility of
//! stored outputs depends on that choice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A new master seed for an independent family of streams, e.g. one
    /// per run or per purpose.
    pub fn derive(master_seed: u64, tag: u64) -> u64 {
        splitmix64(splitmix64(master_seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A discretely sampled Brownian path on `m` equal steps of `[0, T]`.
///
/// The path is stored as its cumulative values `W(t_k)`, `W(0) = 0`, summed
/// left to right from the drawn increments. Coarsening subsamples the path,
/// so every level of a coupled hierarchy sees bitwise the same `W` at the
/// times it shares with the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    horizon: f64,
    path: Vec<f64>,
}

impl BrownianIncrements {
    pub fn from_increments(horizon: f64, dw: &[f64]) -> Result<Self> {
        if dw.is_empty() {
            return Err(Error::param("m", "need at least one step"));
        }
        if !(horizon > 0.0) {
            return Err(Error::param(
                "T",
                format!("horizon must be positive, got {horizon}"),
            ));
        }
        let mut path = Vec::with_capacity(dw.len() + 1);
        let mut w = 0.0;
        path.push(w);
        for d in dw {
            w += d;
            path.push(w);
        }
        Ok(Self { horizon, path })
    }

    pub fn steps(&self) -> usize {
        self.path.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    /// `W(t_k)` for `k` in `0..=m`.
    pub fn path(&self) -> &[f64] {
        &self.path
    }

    pub fn increment(&self, i: usize) -> f64 {
        self.path[i + 1] - self.path[i]
    }

    pub fn increments(&self) -> Vec<f64> {
        self.path.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// `W(T)`, the sum of all increments.
    pub fn terminal(&self) -> f64 {
        self.path[self.steps()]
    }

    /// Merge blocks of `factor` consecutive steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::param(
                "factor",
                format!("{factor} does not divide {} steps", self.steps()),
            ));
        }
        Ok(Self {
            horizon: self.horizon,
            path: self.path.iter().step_by(factor).copied().collect(),
        })
    }
}

/// `m` i.i.d. `N(0, T/m)` increments from the stream `seed`.
pub fn brownian_increments(seed: SeedSpec, m: usize, horizon: f64) -> Result<BrownianIncrements> {
    let mut rng = seed.rng();
    brownian_from_rng(&mut rng, m, horizon)
}

pub(crate) fn brownian_from_rng<R: Rng>(
    rng: &mut R,
    m: usize,
    horizon: f64,
) -> Result<BrownianIncrements> {
    if m == 0 {
        return Err(Error::param("m", "need at least one step"));
    }
    if !(horizon > 0.0) {
        return Err(Error::param(
            "T",
            format!("horizon must be positive, got {horizon}"),
        ));
    }
    let sd = (horizon / m as f64).sqrt();
    let dw: Vec<f64> = (0..m)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    BrownianIncrements::from_increments(horizon, &dw)
}

pub fn coarsen_increments(fine: &BrownianIncrements, factor: usize) -> Result<BrownianIncrements> {
    fine.coarsen(factor)
}

/// `n_paths` i.i.d. standard normal initial values.
pub fn sample_initial(seed: SeedSpec, n_paths: usize) -> Result<Vec<f64>> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "need at least one path"));
    }
    let mut rng = seed.rng();
    Ok((0..n_paths).map(|_| rng.sample(StandardNormal)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbmConstruction {
    CirculantEmbedding,
    Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FbmMethod {
    /// Circulant embedding, falling back to Cholesky if the embedding is
    /// not nonnegative definite.
    #[default]
    Auto,
    Cholesky,
}

/// An fBm path sampled at `t_k = k * dt`, `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: f64,
    pub dt: f64,
    pub values: Vec<f64>,
    pub construction: FbmConstruction,
}

impl FbmPath {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Autocovariance of unit-spacing fractional Gaussian noise.
fn fgn_autocov(hurst: f64, k: usize) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

pub fn fbm_path(seed: SeedSpec, hurst: f64, n: usize, dt: f64) -> Result<FbmPath> {
    fbm_path_with(seed, hurst, n, dt, FbmMethod::Auto)
}

pub fn fbm_path_with(
    seed: SeedSpec,
    hurst: f64,
    n: usize,
    dt: f64,
    method: FbmMethod,
) -> Result<FbmPath> {
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::param(
            "H",
            format!("Hurst index must lie in (1/2, 1), got {hurst}"),
        ));
    }
    if n < 2 {
        return Err(Error::param(
            "n",
            format!("need at least 2 points, got {n}"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let mut rng = seed.rng();
    let m = n - 1;
    let (noise, construction) = match method {
        FbmMethod::Auto => match circulant_fgn(&mut rng, hurst, m) {
            Some(noise) => (noise, FbmConstruction::CirculantEmbedding),
            None => (cholesky_fgn(&mut rng, hurst, m)?, FbmConstruction::Cholesky),
        },
        FbmMethod::Cholesky => (cholesky_fgn(&mut rng, hurst, m)?, FbmConstruction::Cholesky),
    };
    let scale = dt.powf(hurst);
    let mut values = Vec::with_capacity(n);
    let mut acc = 0.0;
    values.push(0.0);
    for g in noise {
        acc += g;
        values.push(scale * acc);
    }
    Ok(FbmPath {
        hurst,
        dt,
        values,
        construction,
    })
}

/// Davies-Harte: embed the `m x m` fGn covariance in a circulant matrix of
/// size `2m` and colour complex white noise with the square roots of its
/// eigenvalues. Returns `None` if an eigenvalue is materially negative.
fn circulant_fgn<R: Rng>(rng: &mut R, hurst: f64, m: usize) -> Option<Vec<f64>> {
    if m == 1 {
        return Some(vec![rng.sample(StandardNormal)]);
    }
    let size = 2 * m;
    let mut row: Vec<Complex<f64>> = (0..size)
        .map(|j| {
            let k = if j <= m { j } else { size - j };
            Complex::new(fgn_autocov(hurst, k), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut row);

    let tol = 1e-10 * row[0].re.abs().max(1.0);
    if row.iter().any(|l| l.re < -tol) {
        return None;
    }
    let eig: Vec<f64> = row.iter().map(|l| l.re.max(0.0)).collect();

    let mut w = vec![Complex::new(0.0, 0.0); size];
    let n2 = size as f64;
    w[0] = Complex::new(
        (eig[0] / n2).sqrt() * rng.sample::<f64, _>(StandardNormal),
        0.0,
    );
    w[m] = Complex::new(
        (eig[m] / n2).sqrt() * rng.sample::<f64, _>(StandardNormal),
        0.0,
    );
    for k in 1..m {
        let s = (eig[k] / (2.0 * n2)).sqrt();
        let z = Complex::new(
            s * rng.sample::<f64, _>(StandardNormal),
            s * rng.sample::<f64, _>(StandardNormal),
        );
        w[k] = z;
        w[size - k] = z.conj();
    }
    fft.process(&mut w);
    Some(w[..m].iter().map(|c| c.re).collect())
}

fn cholesky_fgn<R: Rng>(rng: &mut R, hurst: f64, m: usize) -> Result<Vec<f64>> {
    let cov: Vec<f64> = (0..m).map(|k| fgn_autocov(hurst, k)).collect();
    // lower-triangular factor, row-major
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = cov[i - j];
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Degenerate(
                        "fGn covariance is not positive definite".into(),
                    ));
                }
                l[i * m + i] = s.sqrt();
            } else {
                l[i * m + j] = s / l[j * m + j];
            }
        }
    }
    let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    Ok((0..m)
        .map(|i| (0..=i).map(|k| l[i * m + k] * z[k]).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn var(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn brownian_is_deterministic() {
        let s = SeedSpec::new(7, 3);
        assert_eq!(
            brownian_increments(s, 64, 1.0).unwrap(),
            brownian_increments(s, 64, 1.0).unwrap()
        );
        assert_ne!(
            brownian_increments(s, 64, 1.0).unwrap(),
            brownian_increments(SeedSpec::new(7, 4), 64, 1.0).unwrap()
        );
    }

    #[test]
    fn brownian_rejects_bad_args() {
        assert!(brownian_increments(SeedSpec::new(1, 1), 0, 1.0).is_err());
        assert!(brownian_increments(SeedSpec::new(1, 1), 4, 0.0).is_err());
    }

    #[test]
    fn brownian_moments() {
        let m = 2048;
        let mut first = Vec::with_capacity(10_000);
        let mut totals = Vec::with_capacity(10_000);
        for p in 0..10_000 {
            let w = brownian_increments(SeedSpec::new(2024, p), m, 1.0).unwrap();
            first.push(w.increment(0));
            totals.push(w.terminal());
        }
        let v = var(&first);
        assert!((v * m as f64 - 1.0).abs() < 0.05, "dW variance {v}");
        let v = var(&totals);
        assert!((v - 1.0).abs() < 0.05, "W_T variance {v}");
    }

    #[test]
    fn coarsen_block_sums() {
        let fine = BrownianIncrements::from_increments(1.0, &[0.5, -0.25, 1.0, 0.125]).unwrap();
        assert_eq!(fine.coarsen(1).unwrap(), fine);
        let coarse = fine.coarsen(2).unwrap();
        assert_eq!(coarse.increments(), vec![0.25, 1.125]);
        assert_eq!(coarse.terminal(), fine.terminal());
        assert!(fine.coarsen(3).is_err());
        assert!(fine.coarsen(0).is_err());
    }

    #[test]
    fn sample_initial_moments() {
        let xs = sample_initial(SeedSpec::new(11, 0), 10_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05);
        assert!((var(&xs) - 1.0).abs() < 0.05);
        assert_eq!(xs, sample_initial(SeedSpec::new(11, 0), 10_000).unwrap());
        assert!(sample_initial(SeedSpec::new(11, 0), 0).is_err());
    }

    #[test]
    fn fbm_rejects_bad_hurst() {
        for h in [0.5, 0.3, 1.0, 1.2] {
            assert!(fbm_path(SeedSpec::new(1, 0), h, 16, 0.1).is_err());
        }
    }

    #[test]
    fn fbm_pinned_origin_and_construction() {
        for s in 0..20 {
            let p = fbm_path(SeedSpec::new(5, s), 0.7, 257, 0.01).unwrap();
            assert_eq!(p.values[0], 0.0);
            assert_eq!(p.len(), 257);
            assert_eq!(p.construction, FbmConstruction::CirculantEmbedding);
        }
        let p = fbm_path_with(SeedSpec::new(5, 0), 0.7, 33, 0.01, FbmMethod::Cholesky).unwrap();
        assert_eq!(p.construction, FbmConstruction::Cholesky);
        assert_eq!(p.values[0], 0.0);
    }

    fn cov_check(method: FbmMethod) {
        let (h, dt) = (0.7, 0.25);
        let (s, t) = (0.25, 0.75);
        let mut acc = 0.0;
        let n = 10_000;
        for k in 0..n {
            let p = fbm_path_with(SeedSpec::new(99, k), h, 5, dt, method).unwrap();
            acc += p.values[1] * p.values[3];
        }
        let emp = acc / n as f64;
        let exact =
            0.5 * (f64::powf(t, 2.0 * h) + f64::powf(s, 2.0 * h) - f64::powf(t - s, 2.0 * h));
        assert!(((emp - exact) / exact).abs() < 0.05, "{emp} vs {exact}");
    }

    #[test]
    fn fbm_covariance_circulant() {
        cov_check(FbmMethod::Auto);
    }

    #[test]
    fn fbm_covariance_cholesky() {
        cov_check(FbmMethod::Cholesky);
    }

    proptest! {
        #[test]
        fn coarsening_telescopes(seed in 0u64..1000, a in 1usize..4, b in 1usize..4) {
            let m = 2usize.pow(a as u32) * 3usize.pow(b as u32) * 2;
            let w = brownian_increments(SeedSpec::new(seed, 1), m, 1.0).unwrap();
            let fa = 2usize.pow(a as u32);
            let fb = 3usize.pow(b as u32);
            let two_step = w.coarsen(fa).unwrap().coarsen(fb).unwrap();
            prop_assert_eq!(two_step, w.coarsen(fa * fb).unwrap());
        }
    }
}
