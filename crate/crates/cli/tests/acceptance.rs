//! CLI acceptance: reproducibility across thread counts (criterion 10) plus
//! the documented exit codes and output layout.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qplab")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qplab-test-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const REPRO_CONFIG: &str = r#"{
  "potential": {"family": "amo", "lambda": 2.0},
  "frequency": {"kind": "golden"},
  "n": 1200,
  "phases": 8,
  "trunc_size": 150,
  "eps_points": 10,
  "eps_max": 0.45,
  "seed": 5,
  "energies": {"mode": "spectrum", "count": 5}
}"#;

#[test]
fn criterion_10_identical_bytes_across_thread_counts() {
    let dir = tmp_dir("repro");
    let config = write_config(&dir, "config.json", REPRO_CONFIG);
    let mut outputs = Vec::new();
    for (tag, threads) in [("t1", "1"), ("t4", "4")] {
        let out = dir.join(tag);
        let status = Command::new(bin())
            .args(["classify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(fs::read(out.join("classify.csv")).unwrap());
    }
    assert_eq!(
        outputs[0], outputs[1],
        "classify.csv differs between 1 and 4 threads"
    );

    // Same check through the environment-variable fallback and a second
    // command with float-heavy output.
    let mut profiles = Vec::new();
    for (tag, threads) in [("p2", "2"), ("p3", "3")] {
        let out = dir.join(tag);
        let status = Command::new(bin())
            .args(["profile", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .env("QPLAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        profiles.push(fs::read(out.join("profile.csv")).unwrap());
    }
    assert_eq!(
        profiles[0], profiles[1],
        "profile.csv differs between 2 and 3 threads"
    );
    println!(
        "[acceptance] criterion 10 (byte-identical output across thread counts): PASS — \
         classify.csv ({} bytes) and profile.csv ({} bytes) agree",
        outputs[0].len(),
        profiles[0].len()
    );
}

#[test]
fn unknown_key_exits_two_and_names_the_key() {
    let dir = tmp_dir("badkey");
    let config = write_config(
        &dir,
        "bad.json",
        r#"{"potential": {"family": "amo", "lamda": 2.0}, "frequency": {"kind": "golden"}}"#,
    );
    let out = Command::new(bin())
        .args(["classify", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("lamda"), "stderr was: {stderr}");
}

#[test]
fn eps_grid_outside_strip_exits_two_citing_strip_width() {
    let dir = tmp_dir("badeps");
    let config = write_config(
        &dir,
        "bad.json",
        r#"{"potential": {"family": "amo", "lambda": 2.0}, "frequency": {"kind": "golden"}, "eps_max": 1.5}"#,
    );
    let out = Command::new(bin())
        .args(["profile", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("strip_width"), "stderr was: {stderr}");
}

#[test]
fn free_spectrum_has_zero_gap_rows() {
    let dir = tmp_dir("freespec");
    let config = write_config(
        &dir,
        "free.json",
        r#"{
            "potential": {"family": "free"},
            "frequency": {"kind": "golden"},
            "trunc_size": 200,
            "phases": 4
        }"#,
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["spectrum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let gaps = fs::read_to_string(out.join("gaps.csv")).unwrap();
    assert_eq!(gaps.lines().count(), 1, "expected only the header: {gaps}");
}

#[test]
fn output_directory_carries_resolved_config_and_version() {
    let dir = tmp_dir("echo");
    let config = write_config(&dir, "config.json", REPRO_CONFIG);
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["spectrum", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let echo = fs::read_to_string(out.join("resolved_config.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&echo).unwrap();
    assert_eq!(parsed["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(parsed["command"], "spectrum");
    assert_eq!(parsed["config"]["n"], 1200);
    // Defaults are filled in the echo.
    assert_eq!(parsed["config"]["slope_tol"], 0.1);
}

#[test]
fn butterfly_band_count_matches_denominator() {
    let dir = tmp_dir("butterfly");
    let config = write_config(
        &dir,
        "bf.json",
        r#"{
            "potential": {"family": "amo", "lambda": 1.0},
            "frequency": {"kind": "golden"},
            "q_max": 6,
            "bloch_phases": 4
        }"#,
    );
    let out = dir.join("out");
    let status = Command::new(bin())
        .args(["butterfly", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("butterfly.csv")).unwrap();
    let mut counts = std::collections::HashMap::<(u64, u64), u64>::new();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let p: u64 = cols[0].parse().unwrap();
        let q: u64 = cols[1].parse().unwrap();
        *counts.entry((p, q)).or_default() += 1;
    }
    for (&(p, q), &count) in &counts {
        assert_eq!(count, q, "band count for {p}/{q} was {count}");
    }
}
