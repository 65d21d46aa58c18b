//! End-to-end runs of the binary: exit codes, determinism, manifests.

use std::path::Path;
use std::process::{Command, Output};

use anderson_core::io::{parse_csv, sha256_hex};

const BIN: &str = env!("CARGO_BIN_EXE_anderson-lab");

const GOLDEN_CONFIG: &str = "[grid]\ndim = 1\nn = 64\n[spectrum]\nnum_eigs = 5\n";

/// Eigenvalues of the golden run (1D, N = 64, ε = 1/16, seed 1), frozen from
/// the first run of this binary.
const GOLDEN_LAMBDAS: [f64; 5] = [
    2.7517101691797274e-1,
    3.9215393154818756e1,
    4.0315367742743874e1,
    1.5801432746077103e2,
    1.5839155942354307e2,
];

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("ANDERSON_LAB_OUT")
        .output()
        .expect("binary runs")
}

fn golden(dir: &Path, out: &str, jobs: &str) -> Output {
    std::fs::write(dir.join("golden.toml"), GOLDEN_CONFIG).unwrap();
    lab(
        &["spectrum", "--config", "golden.toml", "--seed", "1", "--jobs", jobs, "--out", out],
        dir,
    )
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(lab(&["bogus"], tmp.path()).status.code(), Some(2));
    assert_eq!(lab(&[], tmp.path()).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[grid]\nsize = 3\n").unwrap();
    let out = lab(&["spectrum", "--config", "bad.toml", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("size"));
    // the default grid is 2D, which the control module rejects
    assert_eq!(lab(&["control", "--out", "x"], tmp.path()).status.code(), Some(2));
    assert_eq!(lab(&["spectrum", "--config", "missing.toml"], tmp.path()).status.code(), Some(2));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn golden_spectrum_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(golden(tmp.path(), "a", "1").status.code(), Some(0));
    assert_eq!(golden(tmp.path(), "b", "3").status.code(), Some(0));
    let csv = "spectrum/seed_1/eigenvalues.csv";
    let a = std::fs::read(tmp.path().join("a").join(csv)).unwrap();
    let b = std::fs::read(tmp.path().join("b").join(csv)).unwrap();
    assert_eq!(a, b, "eigenvalues.csv differs between runs");
    let (header, rows) = parse_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(header, ["k", "lambda", "residual"]);
    for (row, want) in rows.iter().zip(GOLDEN_LAMBDAS) {
        assert!((row[1] - want).abs() <= 1e-9 * want.abs(), "{} vs {want}", row[1]);
        assert!(row[2] < 1e-6);
    }
    // timings live only in `stages`, so the artifact lists agree exactly
    let (ma, mb) = (manifest(&tmp.path().join("a")), manifest(&tmp.path().join("b")));
    assert_eq!(ma["artifacts"], mb["artifacts"]);
    assert_eq!(ma["status"], "ok");
}

#[test]
fn manifest_hashes_match_files() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(golden(tmp.path(), "run", "1").status.code(), Some(0));
    let dir = tmp.path().join("run");
    let m = manifest(&dir);
    let artifacts = m["artifacts"].as_array().unwrap();
    assert!(artifacts.len() >= 3);
    for a in artifacts {
        let bytes = std::fs::read(dir.join(a["name"].as_str().unwrap())).unwrap();
        assert_eq!(a["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(a["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
    assert_eq!(m["config"]["grid"]["n"], 64);
    assert!(m["constants"]["version"].is_number());
    assert_eq!(lab(&["report", "--out", "run"], tmp.path()).status.code(), Some(0));
    // a modified artifact is reported stale
    std::fs::write(dir.join("spectrum/seed_1/eigenvalues.csv"), "k\n").unwrap();
    let out = lab(&["report", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("stale spectrum/seed_1/eigenvalues.csv"));
}

#[test]
fn output_directory_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), format!("output = \"from_config\"\n{GOLDEN_CONFIG}")).unwrap();
    let run = |env: Option<&str>, out: Option<&str>| {
        let mut cmd = Command::new(BIN);
        cmd.args(["noise", "--config", "c.toml"])
            .current_dir(tmp.path())
            .env_remove("ANDERSON_LAB_OUT");
        if let Some(e) = env {
            cmd.env("ANDERSON_LAB_OUT", e);
        }
        if let Some(o) = out {
            cmd.args(["--out", o]);
        }
        assert!(cmd.output().unwrap().status.success());
    };
    run(None, None);
    assert!(tmp.path().join("from_config/manifest.json").exists());
    run(Some("from_env"), None);
    assert!(tmp.path().join("from_env/manifest.json").exists());
    run(Some("from_env2"), Some("from_flag"));
    assert!(tmp.path().join("from_flag/manifest.json").exists());
    assert!(!tmp.path().join("from_env2").exists());
}
