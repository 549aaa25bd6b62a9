//! The `nsalpha` executable: exit codes, outputs and provenance records.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const DECAY: &str = "
mode = oracle2d
name = decay
[grid]
n = 16
[model]
nu = 0.05
alpha = 0.1
horizon = 0.5
[time]
dt = 0.05
[initial]
family = single-mode
k1 = 1 1
[output]
dir = unused
[acceptance]
decay_tol = 1e-10
";

fn nsalpha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsalpha"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.ini");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn passing_run_writes_a_consistent_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DECAY);
    let out_dir = dir.path().join("out");
    let out = nsalpha(&["run", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS exact decay"), "{stdout}");
    assert!(!stdout.contains("FAIL"));

    let manifest = json(&out_dir.join("manifest.json"));
    let report = json(&out_dir.join("report.json"));
    assert_eq!(manifest["config_hash"], report["config_hash"]);
    assert!(out_dir.join("timing.json").exists());
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for entry in files {
        let bytes = std::fs::read(out_dir.join(entry["name"].as_str().unwrap())).unwrap();
        assert_eq!(entry["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }

    // a tampered data file no longer matches its manifest entry
    let name = files[0]["name"].as_str().unwrap();
    let mut bytes = std::fs::read(out_dir.join(name)).unwrap();
    bytes[0] ^= 1;
    assert_ne!(
        files[0]["sha256"].as_str().unwrap(),
        hex::encode(Sha256::digest(&bytes))
    );
}

#[test]
fn check_echoes_the_canonical_config_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DECAY);
    let out = nsalpha(&["check", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let hash_line = stdout.lines().last().unwrap();
    let body: String = stdout
        .lines()
        .filter(|l| !l.starts_with("hash = "))
        .map(|l| format!("{l}\n"))
        .collect();
    assert_eq!(
        hash_line,
        format!("hash = {}", hex::encode(Sha256::digest(body.as_bytes())))
    );
    assert!(body.contains("model.nu=0.05"));

    let changed = nsalpha(&["check", &cfg, "--set", "model.nu=0.06"]);
    let changed = String::from_utf8(changed.stdout).unwrap();
    assert!(changed.contains("model.nu=0.06"));
    assert_ne!(changed.lines().last().unwrap(), hash_line);
}

#[test]
fn failing_verdicts_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), DECAY);
    let out_dir = dir.path().join("out");
    // single-mode decay is accurate to round-off, not to zero
    let out = nsalpha(&[
        "run",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "acceptance.decay_tol=1e-300",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL exact decay"));
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn invalid_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &DECAY.replace("mode = oracle2d", "mode = nope"));
    let out = nsalpha(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mode"));
    let missing = nsalpha(&["run", "/nonexistent/config.ini"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn command_line_seed_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let text = "
mode = crosscheck
name = seeded
[grid]
n = 16
[model]
nu = 0.05
alpha = 0.1
horizon = 0.2
[time]
dt = 0.02
[initial]
family = single-mode
k1 = 1 0
[mc]
seed = 3
n_paths = 200
dt = 0.01
points = 0.1 0.2
times = 0.2
";
    let cfg = write_config(dir.path(), text);
    let out_dir = dir.path().join("out");
    let out = nsalpha(&[
        "run",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "mc.seed=5",
        "--seed",
        "11",
    ]);
    assert!(
        out.status.code().is_some_and(|c| c < 2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(json(&out_dir.join("report.json"))["seed"], 11);
}
