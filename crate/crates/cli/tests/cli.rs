use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gse_cli::commands::{AsymptoticsRow, CompareRow};
use gse_cli::output::Report;

fn gse(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gse"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env_remove("GSE_SEED")
        .output()
        .unwrap()
}

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const BROWNIAN: &str = r#"{"model": {"type": "fbm_sum", "hursts": [0.5]}, "queue": {"c": 1.5, "beta": 1},
    "levels": [1, 2, 3], "horizon": {"form": "rho_times_delta", "rho": 0}, "tail_mode": "mills_ratio",
    "mc": {"n": 100000, "mode": "point_zero"}, "pickands": {"constants": {"rate": 4.5}}}"#;

fn json<R: serde::de::DeserializeOwned>(out: &Output) -> Report<R> {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn brownian_asymptotics_are_exponential() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "bm.json", BROWNIAN);
    let report: Report<AsymptoticsRow> = json(&gse(&["asymptotics", "--format", "json", "--no-timestamp"], &cfg));
    assert_eq!(report.command, "asymptotics");
    assert_eq!(report.rows.len(), 9);
    for row in &report.rows {
        let exact = (-3.0 * row.u).exp();
        let value = row.value.unwrap();
        assert!(((value - exact) / exact).abs() < 1e-10, "{row:?}");
    }
    // a zero window makes sup and inf coincide
    for u in [1.0, 2.0, 3.0] {
        let at: Vec<f64> = report.rows.iter().filter(|r| r.u == u).filter_map(|r| r.value).collect();
        assert!(at.iter().all(|v| *v == at[0]));
    }
}

#[test]
fn brownian_compare_matches_exact_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "bm.json", BROWNIAN);
    let report: Report<CompareRow> = json(&gse(&["compare", "--format", "json", "--no-timestamp", "--seed", "5"], &cfg));
    assert_eq!(report.seed, 5);
    // three levels share paths, so single 95% intervals miss together too often
    for r in &report.rows {
        let se = (r.asymptotic * (1.0 - r.asymptotic) / r.n as f64).sqrt();
        assert!((r.p_hat - r.asymptotic).abs() <= 4.0 * se, "{r:?}");
        assert!(r.ratio_low <= r.ratio && r.ratio <= r.ratio_high);
        assert_eq!(r.ratio_covers_one, r.ratio_low <= 1.0 && 1.0 <= r.ratio_high);
    }
}

#[test]
fn csv_is_reproducible_and_seed_precedence_holds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "bm.json", &BROWNIAN.replace("100000", "5000"));
    let a = gse(&["simulate", "--no-timestamp", "--seed", "3", "--threads", "1"], &cfg);
    let b = gse(&["simulate", "--no-timestamp", "--seed", "3", "--threads", "4"], &cfg);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(!String::from_utf8_lossy(&a.stdout).contains("generated_at"));

    let env = |seed: &str, extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_gse"))
            .args(["simulate", "--no-timestamp", "--config"])
            .arg(&cfg)
            .args(extra)
            .env("GSE_SEED", seed)
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(env("3", &[]), a.stdout);
    assert_eq!(env("99", &["--seed", "3"]), a.stdout);
    assert_ne!(env("4", &[]), a.stdout);

    let stamped = gse(&["simulate", "--seed", "3"], &cfg);
    assert!(String::from_utf8_lossy(&stamped.stdout).starts_with("# generated_at="));
}

#[test]
fn output_file_and_levels_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "bm.json", BROWNIAN);
    let out = dir.path().join("rows.json");
    let st = gse(
        &["asymptotics", "--format", "json", "--levels", "4,5", "--out", out.to_str().unwrap(), "--no-timestamp"],
        &cfg,
    );
    assert!(st.status.success() && st.stdout.is_empty());
    let report: Report<AsymptoticsRow> = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert!(report.rows.iter().all(|r| r.u == 4.0 || r.u == 5.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(&dir, "a.json", r#"{"model": {"type": "fbm_sum", "hursts": [0.5]}, "queue": {"c": 1, "beta": 1}, "x": 1}"#);
    assert_eq!(gse(&["validate"], &unknown).status.code(), Some(3));
    let bad_c = write(&dir, "b.json", r#"{"model": {"type": "fbm_sum", "hursts": [0.5]}, "queue": {"c": -1, "beta": 1}}"#);
    assert_eq!(gse(&["asymptotics"], &bad_c).status.code(), Some(3));
    let bad_level = write(&dir, "c.json", &BROWNIAN.replace("[1, 2, 3]", "[0, 1]"));
    assert_eq!(gse(&["asymptotics"], &bad_level).status.code(), Some(3));
    assert_eq!(gse(&["nonsense"], &bad_level).status.code(), Some(3));
    assert_eq!(gse(&["validate"], &dir.path().join("missing.json")).status.code(), Some(3));

    let good = write(&dir, "d.json", r#"{"model": {"type": "fbm_sum", "hursts": [0.75, 0.4]}, "queue": {"c": 1, "beta": 1}}"#);
    let out = gse(&["validate"], &good);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    // the top component is too light to show up where the large-t index is fitted
    let hidden = write(
        &dir,
        "e.json",
        r#"{"model": {"type": "fbm_sum", "hursts": [0.9, 0.1], "weights": [1e-9, 1]}, "queue": {"c": 1, "beta": 1}}"#,
    );
    let out = gse(&["validate"], &hidden);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("false"));
}

#[test]
fn offline_without_constants_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir,
        "f.json",
        r#"{"model": {"type": "fbm_sum", "hursts": [0.75]}, "queue": {"c": 1, "beta": 1}, "levels": [5]}"#,
    );
    let out = gse(&["asymptotics", "--no-estimate"], &cfg);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}
