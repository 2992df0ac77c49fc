//! Experiment configuration: flat TOML with an optional `[pde]` section.
//!
//! ```toml
//! beta = 0.49
//! F = ["sin", "cos"]
//! levels = [128, 256, 512]
//! m_ref = 2048
//!
//! [pde]
//! abs_tol = 1e-9
//! ```
//!
//! Every key except `beta` has a default. Unknown keys are rejected.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::analysis::{self, RatePlan};
use crate::error::{Error, Result};
use crate::fokker_planck::FpSolverOptions;
use crate::nonlinear::NonlinearF;

const TOP_KEYS: &[&str] = &[
    "beta",
    "lambda",
    "hurst",
    "T",
    "L",
    "n_space",
    "m_ref",
    "levels",
    "n_paths",
    "n_runs",
    "fixed_drift",
    "F",
    "seed",
    "drift_override",
    "per_level_density",
    "write_field",
    "pde",
];
const PDE_KEYS: &[&str] = &["abs_tol", "rel_tol", "max_step", "store_count"];

/// Replaces `F(rho^N) b^N` by a synthetic drift, for sanity runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DriftOverride {
    #[default]
    None,
    Zero,
    Constant(f64),
}

impl fmt::Display for DriftOverride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DriftOverride::None => write!(f, "none"),
            DriftOverride::Zero => write!(f, "zero"),
            DriftOverride::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for DriftOverride {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(DriftOverride::None),
            "zero" => Ok(DriftOverride::Zero),
            other => other
                .strip_prefix("constant:")
                .and_then(|c| c.trim().parse::<f64>().ok())
                .filter(|c| c.is_finite())
                .map(DriftOverride::Constant)
                .ok_or_else(|| {
                    Error::config(
                        "drift_override",
                        format!("expected none|zero|constant:<c>, got `{s}`"),
                    )
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub beta: f64,
    pub lambda: f64,
    pub hurst: f64,
    pub horizon: f64,
    pub half_width: f64,
    pub n_space: usize,
    pub m_ref: usize,
    pub levels: Vec<usize>,
    pub n_paths: usize,
    pub n_runs: usize,
    /// One fBm per configuration instead of a fresh one per run.
    pub fixed_drift: bool,
    pub nonlinearities: Vec<NonlinearF>,
    pub seed: u64,
    pub pde: FpSolverOptions,
    pub drift_override: DriftOverride,
    /// Build `b^N` and `rho^N` per level with `N = N(m)`; otherwise every
    /// level reuses the reference level's drift.
    pub per_level_density: bool,
    /// Also write the full space-time density field.
    pub write_field: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// The numerical-illustration setup: T = 1, [-10, 10] with 4001 nodes,
    /// 2^11 + 1 stored slices, 10^4 paths, levels 2^7..2^9, m_ref = 2^11.
    Paper,
    /// `Paper` with 10^3 paths.
    Smoke,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Profile::Paper),
            "smoke" => Ok(Profile::Smoke),
            _ => Err(Error::config("profile", format!("unknown profile `{s}`"))),
        }
    }
}

impl Profile {
    fn table(self) -> Table {
        let mut t: Table = toml::from_str(
            r#"
            T = 1.0
            L = 10.0
            n_space = 4001
            m_ref = 2048
            levels = [128, 256, 512]
            n_paths = 10000
            [pde]
            store_count = 2049
            "#,
        )
        .expect("profile table parses");
        if self == Profile::Smoke {
            t.insert("n_paths".into(), Value::Integer(1000));
        }
        t
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawPde {
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_step: Option<f64>,
    store_count: Option<u64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    beta: Option<f64>,
    lambda: Option<f64>,
    hurst: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    #[serde(rename = "L")]
    half_width: Option<f64>,
    n_space: Option<u64>,
    m_ref: Option<u64>,
    levels: Option<Vec<u64>>,
    n_paths: Option<u64>,
    n_runs: Option<u64>,
    fixed_drift: Option<bool>,
    #[serde(rename = "F")]
    nonlinearities: Option<OneOrMany>,
    seed: Option<u64>,
    drift_override: Option<String>,
    per_level_density: Option<bool>,
    write_field: Option<bool>,
    pde: Option<RawPde>,
}

/// Default `lambda`: 0.01, or half the admissible interval `(0, 1/2 - beta)`
/// when that is narrower.
pub fn default_lambda(beta: f64) -> f64 {
    0.01f64.min(0.5 * (0.5 - beta))
}

fn check_keys(table: &Table) -> Result<()> {
    for (k, v) in table {
        if !TOP_KEYS.contains(&k.as_str()) {
            return Err(Error::config(k.clone(), "unknown key"));
        }
        if k == "pde" {
            let inner = v
                .as_table()
                .ok_or_else(|| Error::config("pde", "expected a table"))?;
            if let Some(bad) = inner.keys().find(|k| !PDE_KEYS.contains(&k.as_str())) {
                return Err(Error::config(format!("pde.{bad}"), "unknown key"));
            }
        }
    }
    Ok(())
}

/// Merge `over` into `base`, one level deep.
fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => {
                for (ik, iv) in o {
                    b.insert(ik, iv);
                }
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_table(text: &str) -> Result<Table> {
    toml::from_str::<Table>(text).map_err(|e| Error::config("<syntax>", e.message().to_string()))
}

/// Layers a configuration from a profile, a file and `key=value` overrides.
#[derive(Debug, Default)]
pub struct ConfigBuilder {
    table: Table,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn profile(mut self, profile: Profile) -> Self {
        merge(&mut self.table, profile.table());
        self
    }

    pub fn text(mut self, text: &str) -> Result<Self> {
        let t = parse_table(text)?;
        check_keys(&t)?;
        merge(&mut self.table, t);
        Ok(self)
    }

    /// A single `key=value` override; `value` is TOML and dotted keys such
    /// as `pde.abs_tol` address the `[pde]` section.
    pub fn set(self, assignment: &str) -> Result<Self> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
        let v = v.trim();
        let literal = if parse_table(&format!("x = {v}")).is_ok() {
            v.to_string()
        } else {
            // bare words such as `F=sin`
            format!("{:?}", v)
        };
        self.text(&format!("{} = {literal}", k.trim()))
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        check_keys(&self.table)?;
        let raw: RawConfig = Value::Table(self.table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<type>", e.message().to_string()))?;
        resolve(raw)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ConfigBuilder::new().text(text)?.build()
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    parse_config(&text)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn resolve(raw: RawConfig) -> Result<ExperimentConfig> {
    let beta = raw
        .beta
        .ok_or_else(|| Error::config("beta", "required key is missing"))?;
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::config(
            "beta",
            format!("must lie in (0, 1/2), got {beta}"),
        ));
    }
    let lambda = raw.lambda.unwrap_or_else(|| default_lambda(beta));
    if !(lambda > 0.0 && lambda < 0.5 - beta) {
        return Err(Error::config(
            "lambda",
            format!(
                "must lie in (0, 1/2 - beta) = (0, {}), got {lambda}",
                0.5 - beta
            ),
        ));
    }
    let hurst = raw.hurst.unwrap_or(1.0 - beta);
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(Error::config(
            "hurst",
            format!("must lie in (1/2, 1), got {hurst}"),
        ));
    }
    let horizon = positive("T", raw.horizon.unwrap_or(1.0))?;
    let half_width = positive("L", raw.half_width.unwrap_or(10.0))?;
    let n_space = raw.n_space.unwrap_or(4001) as usize;
    if n_space < 3 {
        return Err(Error::config("n_space", "need at least 3 nodes"));
    }
    let m_ref = raw.m_ref.unwrap_or(2048) as usize;
    if m_ref == 0 {
        return Err(Error::config("m_ref", "must be positive"));
    }
    let levels: Vec<usize> = raw
        .levels
        .unwrap_or_else(|| vec![128, 256, 512])
        .into_iter()
        .map(|m| m as usize)
        .collect();
    if let Some(&m) = levels.iter().find(|&&m| m == 0 || m_ref % m != 0) {
        return Err(Error::config(
            "levels",
            format!("level {m} does not divide m_ref = {m_ref}"),
        ));
    }
    let n_paths = raw.n_paths.unwrap_or(10_000) as usize;
    if n_paths == 0 {
        return Err(Error::config("n_paths", "must be positive"));
    }
    let n_runs = raw.n_runs.unwrap_or(1) as usize;
    if n_runs == 0 {
        return Err(Error::config("n_runs", "must be positive"));
    }
    let nonlinearities = match raw.nonlinearities {
        None => vec![NonlinearF::sine()],
        Some(OneOrMany::One(s)) => vec![s.parse()?],
        Some(OneOrMany::Many(v)) => v.iter().map(|s| s.parse()).collect::<Result<_>>()?,
    };
    if nonlinearities.is_empty() {
        return Err(Error::config("F", "need at least one nonlinearity"));
    }
    let seed = raw.seed.unwrap_or(20_240_601);
    if seed > i64::MAX as u64 {
        return Err(Error::config("seed", "must fit in a signed 64-bit integer"));
    }
    let rp = raw.pde.unwrap_or_default();
    let defaults = FpSolverOptions::default();
    let pde = FpSolverOptions {
        abs_tol: positive("pde.abs_tol", rp.abs_tol.unwrap_or(defaults.abs_tol))?,
        rel_tol: positive("pde.rel_tol", rp.rel_tol.unwrap_or(defaults.rel_tol))?,
        max_step: positive("pde.max_step", rp.max_step.unwrap_or(defaults.max_step))?,
        store_count: rp.store_count.map_or(defaults.store_count, |v| v as usize),
        boundary: defaults.boundary,
    };
    if pde.store_count < 2 {
        return Err(Error::config(
            "pde.store_count",
            "need at least 2 stored slices",
        ));
    }
    let drift_override = match raw.drift_override {
        Some(s) => s.parse()?,
        None => DriftOverride::None,
    };
    Ok(ExperimentConfig {
        beta,
        lambda,
        hurst,
        horizon,
        half_width,
        n_space,
        m_ref,
        levels,
        n_paths,
        n_runs,
        fixed_drift: raw.fixed_drift.unwrap_or(true),
        nonlinearities,
        seed,
        pde,
        drift_override,
        per_level_density: raw.per_level_density.unwrap_or(true),
        write_field: raw.write_field.unwrap_or(false),
    })
}

impl ExperimentConfig {
    pub fn rate_plan(&self) -> Result<RatePlan> {
        RatePlan::new(self.beta, self.lambda)
    }

    /// `N(m) = round(m^kappa)`.
    pub fn smoothing_level(&self, m: usize) -> Result<f64> {
        Ok(analysis::smoothing_level(
            m,
            analysis::theoretical_kappa(self.beta, self.lambda)?,
        ))
    }

    pub fn grid(&self) -> Result<crate::grid::SpatialGrid> {
        crate::grid::SpatialGrid::new(-self.half_width, self.half_width, self.n_space)
    }

    /// Fully resolved configuration as TOML; parses back to `self`.
    pub fn to_toml(&self) -> String {
        let nonlinearities = self.nonlinearities.iter().map(|f| f.to_string()).collect();
        let raw = RawConfig {
            beta: Some(self.beta),
            lambda: Some(self.lambda),
            hurst: Some(self.hurst),
            horizon: Some(self.horizon),
            half_width: Some(self.half_width),
            n_space: Some(self.n_space as u64),
            m_ref: Some(self.m_ref as u64),
            levels: Some(self.levels.iter().map(|&m| m as u64).collect()),
            n_paths: Some(self.n_paths as u64),
            n_runs: Some(self.n_runs as u64),
            fixed_drift: Some(self.fixed_drift),
            nonlinearities: Some(OneOrMany::Many(nonlinearities)),
            seed: Some(self.seed),
            drift_override: Some(self.drift_override.to_string()),
            per_level_density: Some(self.per_level_density),
            write_field: Some(self.write_field),
            pde: Some(RawPde {
                abs_tol: Some(self.pde.abs_tol),
                rel_tol: Some(self.pde.rel_tol),
                max_step: Some(self.pde.max_step),
                store_count: Some(self.pde.store_count as u64),
            }),
        };
        toml::to_string(&raw).expect("resolved config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn beta_is_required() {
        assert_eq!(key_of(parse_config("").unwrap_err()), "beta");
    }

    #[test]
    fn hurst_defaults_from_beta() {
        let c = parse_config("beta=0.49").unwrap();
        assert!((c.hurst - 0.51).abs() < 1e-15);
        assert!(c.lambda > 0.0 && c.lambda < 0.01);
        let c = parse_config("beta = 0.25").unwrap();
        assert_eq!(c.lambda, 0.01);
        assert_eq!(c.levels, vec![128, 256, 512]);
        assert_eq!(c.m_ref, 2048);
        assert_eq!(c.n_paths, 10_000);
        assert_eq!(c.pde.store_count, 2049);
    }

    #[test]
    fn level_divisibility() {
        assert!(parse_config("beta = 0.1\nlevels=[128,256,512]\nm_ref=2048").is_ok());
        assert_eq!(
            key_of(parse_config("beta = 0.1\nlevels=[100]").unwrap_err()),
            "levels"
        );
    }

    #[test]
    fn unknown_keys_rejected() {
        assert_eq!(
            key_of(parse_config("beta = 0.1\nbetta = 0.2").unwrap_err()),
            "betta"
        );
        assert_eq!(
            key_of(parse_config("beta = 0.1\n[pde]\nabstol = 1e-3").unwrap_err()),
            "pde.abstol"
        );
    }

    #[test]
    fn invariant_violations_name_the_key() {
        assert_eq!(key_of(parse_config("beta = 0.6").unwrap_err()), "beta");
        assert_eq!(
            key_of(parse_config("beta = 0.4\nlambda = 0.2").unwrap_err()),
            "lambda"
        );
        assert_eq!(
            key_of(parse_config("beta = 0.4\nhurst = 0.4").unwrap_err()),
            "hurst"
        );
        assert_eq!(
            key_of(parse_config("beta = 0.4\nF = \"tanh\"").unwrap_err()),
            "F"
        );
        assert_eq!(
            key_of(parse_config("beta = 0.4\n[pde]\nrel_tol = -1.0").unwrap_err()),
            "pde.rel_tol"
        );
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config(
            "beta = 0.125\nF = [\"sin:5\", \"sigmoid:100:0.2\", \"cos\"]\nseed = 77\ndrift_override = \"constant:0.5\"\n[pde]\nabs_tol = 3e-10",
        )
        .unwrap();
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn builder_layers() {
        let c = ConfigBuilder::new()
            .profile(Profile::Smoke)
            .text("beta = 0.3\nn_paths = 50")
            .unwrap()
            .set("F=cos")
            .unwrap()
            .set("pde.store_count=17")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.n_paths, 50);
        assert_eq!(c.nonlinearities, vec![NonlinearF::Cosine]);
        assert_eq!(c.pde.store_count, 17);
        let c = ConfigBuilder::new()
            .profile(Profile::Smoke)
            .set("beta=0.2")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.n_paths, 1000);
        assert!(ConfigBuilder::new().set("nonsense").is_err());
    }
}
