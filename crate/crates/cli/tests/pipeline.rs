use std::fs;
use std::path::Path;
use std::process::Command;

use mvsde_cli::{density_compare, drift_gen, rate_sweep, PipelineError};
use mvsde_core::{parse_config, ConfigBuilder, ExperimentConfig, Profile};

/// A reduced grid and ensemble that keeps each pipeline within seconds.
const SMALL: &str = r#"
beta = 0.3
L = 8.0
n_space = 641
m_ref = 512
levels = [32, 64, 128]
n_paths = 2000
[pde]
store_count = 129
"#;

fn small(extra: &str) -> ExperimentConfig {
    parse_config(&format!("{extra}\n{SMALL}")).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn drift_gen_is_deterministic() {
    let cfg = small("");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    drift_gen(&cfg).unwrap().write(a.path()).unwrap();
    drift_gen(&cfg).unwrap().write(b.path()).unwrap();
    assert_eq!(read(a.path(), "drift.csv"), read(b.path(), "drift.csv"));
    assert_eq!(read(a.path(), "config.toml"), read(b.path(), "config.toml"));
}

#[test]
fn larger_n_has_larger_spread() {
    let out = drift_gen(&small("")).unwrap();
    let sd = |v: &[f64]| {
        let mu = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let spreads: Vec<f64> = out.drifts.iter().map(|(_, b)| sd(b.values())).collect();
    assert!(spreads.len() >= 2);
    for w in spreads.windows(2) {
        assert!(w[1] > w[0], "{spreads:?}");
    }
}

#[test]
fn config_echo_round_trips_and_resolves_hurst() {
    let cfg = parse_config("beta = 0.49").unwrap();
    assert_eq!(cfg.hurst, 0.51);
    let dir = tempfile::tempdir().unwrap();
    let mut quick = small("");
    quick.beta = 0.49;
    quick.hurst = 0.51;
    quick.lambda = 0.005;
    drift_gen(&quick).unwrap().write(dir.path()).unwrap();
    let echo = read(dir.path(), "config.toml");
    assert!(echo.lines().any(|l| l.trim() == "hurst = 0.51"), "{echo}");
    assert_eq!(parse_config(&echo).unwrap(), quick);
}

#[test]
fn density_compare_zero_override_matches_heat_law() {
    let cfg = ConfigBuilder::new()
        .profile(Profile::Paper)
        .set("beta=0.49")
        .and_then(|b| b.set("drift_override=zero"))
        .and_then(|b| b.build())
        .unwrap();
    let first = density_compare(&cfg).unwrap();
    assert_eq!(first.ks.len(), 2);
    for row in &first.ks {
        assert!(row.result.p_value > 0.05, "{row:?}");
    }
    assert!((first.ks[0].result.statistic - first.ks[1].result.statistic).abs() < 1e-4);
    let again = density_compare(&cfg).unwrap();
    assert_eq!(first.ks, again.ks);
}

#[test]
fn density_compare_writes_artifacts() {
    let cfg = small("write_field = true");
    let dir = tempfile::tempdir().unwrap();
    let res = density_compare(&cfg).unwrap();
    res.write(dir.path()).unwrap();
    let ks = read(dir.path(), "ks.csv");
    assert!(ks.starts_with("F,reference,statistic,p_value,n\nsin,rho_T,"));
    for name in [
        "sin/rho_T.csv",
        "sin/terminal_ref.csv",
        "sin/fp_diagnostics.txt",
        "sin/field.csv",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert_eq!(
        read(dir.path(), "sin/terminal_ref.csv").lines().count(),
        cfg.n_paths + 1
    );
}

#[test]
fn constant_drift_sweep_is_degenerate() {
    let cfg = small("drift_override = \"constant:0.7\"");
    let res = rate_sweep(&cfg).unwrap();
    assert!(res.runs.iter().all(|r| r.is_degenerate()));
    assert_eq!(res.summaries[0].mean_rate, None);
    let dir = tempfile::tempdir().unwrap();
    res.write(dir.path()).unwrap();
    assert!(read(dir.path(), "rates.csv").contains(",degenerate,"));
}

#[test]
fn sweep_logs_coupled_smoothing_levels() {
    let mut cfg = small("n_runs = 2\nfixed_drift = false");
    cfg.n_paths = 500;
    let res = rate_sweep(&cfg).unwrap();
    assert_eq!(res.runs.len(), 2);
    for r in &res.runs {
        for &(m, n, e) in &r.errors {
            assert_eq!(n, cfg.smoothing_level(m).unwrap());
            assert!(e > 0.0);
        }
    }
    assert_ne!(res.runs[0].errors, res.runs[1].errors);
    let s = &res.summaries[0];
    assert_eq!(s.runs_used, 2);
    assert!(s.half_width.is_some());
    assert!(s.rate_limit > s.theoretical_rate);
}

#[test]
fn sweep_needs_two_levels() {
    let mut cfg = small("");
    cfg.levels = vec![128];
    assert!(matches!(rate_sweep(&cfg), Err(PipelineError::Config(_))));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mvsde");
    let dir = tempfile::tempdir().unwrap();
    let missing_beta = Command::new(bin)
        .args(["drift-gen", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(missing_beta.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_beta.stderr).contains("beta"));

    let typo = Command::new(bin)
        .args(["drift-gen", "--set", "beta=0.3", "--set", "bta=0.3"])
        .output()
        .unwrap();
    assert_eq!(typo.status.code(), Some(2));

    let cfg_path = dir.path().join("small.toml");
    fs::write(&cfg_path, SMALL).unwrap();
    let ok = Command::new(bin)
        .arg("drift-gen")
        .arg("--config")
        .arg(&cfg_path)
        .env("MVSDE_OUT_DIR", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert!(
        ok.status.success(),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    assert!(dir.path().join("env_out/drift.csv").exists());
}
