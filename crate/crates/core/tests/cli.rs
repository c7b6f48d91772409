//! End-to-end checks of the `gatesim` binary: exit codes, output encodings,
//! seed handling, and cross-format numeric agreement.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gatesim::cli::RunReport;

fn gatesim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gatesim"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn majority_config(dir: &Path, steps: u64) -> PathBuf {
    write_config(
        dir,
        "majority.json",
        &format!(
            r#"{{
              "mode": "ideal",
              "n": 2,
              "steps": {steps},
              "state": [[{a}, 0.0], [{b}, 0.0]]
            }}"#,
            a = 0.7f64.sqrt(),
            b = 0.3f64.sqrt()
        ),
    )
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary should run")
}

#[test]
fn simulate_csv_walks_the_orbit() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 10);
    let out_path = dir.path().join("run.csv");
    let output = run(gatesim()
        .args(["simulate", "--format", "csv"])
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out_path));
    assert_eq!(output.status.code(), Some(0));
    let text = fs::read_to_string(&out_path).unwrap();
    let chosen: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(
        chosen,
        vec!["1", "2", "1", "1", "2", "1", "1", "1", "2", "1"]
    );
}

#[test]
fn simulate_zero_steps_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 0);
    let out_path = dir.path().join("run.json");
    let output = run(gatesim()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out_path));
    assert_eq!(output.status.code(), Some(0));
    let report: RunReport = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert!(report.outcomes.is_empty());
    assert_eq!(report.counts, vec![0, 0]);
}

#[test]
fn malformed_state_length_exits_two_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"mode": "ideal", "n": 2, "steps": 5, "state": [[1.0, 0.0]]}"#,
    );
    let output = run(gatesim().arg("simulate").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("state"), "stderr was: {stderr}");
}

#[test]
fn invisible_state_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "zero.json",
        r#"{"mode": "trivial", "n": 2, "steps": 5, "state": [[0.0, 0.0], [0.0, 0.0]]}"#,
    );
    let output = run(gatesim().arg("simulate").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn extreme_initial_energies_exit_four() {
    // Initial energies far outside the bound's hypothesis break the
    // per-prefix inequality almost immediately.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "extreme.json",
        &format!(
            r#"{{
              "mode": "ideal",
              "n": 2,
              "steps": 100,
              "initial_energies": [100.0, -100.0],
              "state": [[{a}, 0.0], [{a}, 0.0]]
            }}"#,
            a = 0.5f64.sqrt()
        ),
    );
    let output = run(gatesim().arg("simulate").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn missing_h_system_for_random_mode_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "random.json",
        r#"{"mode": "random", "n": 2, "seed": 7, "steps": 0,
            "state": [[1.0, 0.0], [0.0, 0.0]]}"#,
    );
    let output = run(gatesim().arg("independence").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("h_system"), "stderr was: {stderr}");
}

#[test]
fn born_check_exits_zero_and_reports_bound() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 2000);
    let output = run(gatesim().arg("born-check").arg("--config").arg(&config));
    assert_eq!(output.status.code(), Some(0));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("every prefix within bounds"), "{stderr}");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 100);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for path in [&a, &b] {
        let output = run(gatesim()
            .args(["simulate", "--format", "csv"])
            .arg("--config")
            .arg(&config)
            .arg("--output")
            .arg(path));
        assert_eq!(output.status.code(), Some(0));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn csv_and_json_agree_numerically() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 25);
    let json_path = dir.path().join("run.json");
    let csv_path = dir.path().join("run.csv");
    run(gatesim()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&json_path));
    run(gatesim()
        .args(["simulate", "--format", "csv"])
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&csv_path));
    let report: RunReport = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    let csv = fs::read_to_string(&csv_path).unwrap();
    let rows: Vec<Vec<&str>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), report.outcomes.len());
    // The chosen column matches the JSON outcome sequence exactly.
    for (row, &outcome) in rows.iter().zip(&report.outcomes) {
        assert_eq!(row[1].parse::<u32>().unwrap(), outcome);
    }
    // Closeness and final energies agree to CSV precision (12 significant
    // digits).
    let last = rows.last().unwrap();
    for (j, &c_j) in report.closeness.iter().enumerate() {
        let csv_c: f64 = last[2 + j].parse().unwrap();
        assert!((csv_c - c_j).abs() <= 1e-11 * c_j.abs().max(1.0));
    }
    for (j, &rho_j) in report.final_energies.iter().enumerate() {
        let csv_rho: f64 = last[2 + report.closeness.len() + j].parse().unwrap();
        assert!((csv_rho - rho_j).abs() <= 1e-11 * rho_j.abs().max(1.0));
    }
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "random.json",
        r#"{"mode": "random", "n": 3, "m": 2, "seed": 1, "steps": 200,
            "state": [[0.5, 0.2], [-0.3, 0.4], [0.2, -0.6]]}"#,
    );
    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    run(gatesim()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out_a));
    run(gatesim()
        .args(["simulate", "--seed", "2"])
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out_b));
    let a: RunReport = serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    let b: RunReport = serde_json::from_str(&fs::read_to_string(&out_b).unwrap()).unwrap();
    assert_eq!(a.config.seed, 1);
    assert_eq!(b.config.seed, 2);
    assert_ne!(
        a.outcomes, b.outcomes,
        "different seeds gave the same orbit"
    );
}

#[test]
fn jobs_fan_out_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "random.json",
        r#"{"mode": "random", "n": 2, "m": 2, "seed": 10, "steps": 50,
            "state": [[0.8, 0.0], [0.6, 0.0]]}"#,
    );
    let out = dir.path().join("fan.json");
    let output = run(gatesim()
        .args(["simulate", "--jobs", "3"])
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out));
    assert_eq!(output.status.code(), Some(0));
    for seed in 10..13u64 {
        let path = dir.path().join(format!("fan.seed{seed}.json"));
        let report: RunReport = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(report.config.seed, seed);
        assert_eq!(report.outcomes.len(), 50);
    }
}

#[test]
fn trace_ops_rejects_invalid_times() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 0);
    let output = run(gatesim()
        .args(["trace-ops", "--times", "abc"])
        .arg("--config")
        .arg(&config));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn independence_csv_lists_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let config = majority_config(dir.path(), 0);
    let out = dir.path().join("ind.csv");
    let output = run(gatesim()
        .args(["independence", "--format", "csv"])
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&out));
    assert_eq!(output.status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("gate,residual"));
    assert_eq!(text.lines().count(), 3);
}
