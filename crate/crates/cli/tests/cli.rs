//! End-to-end runs of the `gpi` binary against a temporary directory.

use std::path::{Path, PathBuf};
use std::process::Command;

fn gpi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpi"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gpi-cli-test-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, out_dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let config = format!(
        r#"{{
  "instance": {{"family": "single_chain", "h": 6}},
  "algorithms": ["bee-gpi", "bpi-ucrl"],
  "mu0_grid": [1.0, 1.5],
  "delta": 0.05,
  "trials": 2,
  "base_seed": 11,
  "output_dir": "{}"
}}"#,
        out_dir.display()
    );
    std::fs::write(&path, config).unwrap();
    path
}

#[test]
fn run_then_plot_round_trip() {
    let dir = temp_dir("run");
    let out_dir = dir.join("results");
    let config = write_config(&dir, &out_dir);

    let status = gpi()
        .args(["run", "--config", config.to_str().unwrap(), "--jobs", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("trial,seed,algorithm,mu0,tau,verdict,verdict_correct,wall_ms\n"));
    assert_eq!(csv.lines().count(), 9); // header + 2 algs * 2 mu0 * 2 trials
    let jsonl = std::fs::read_to_string(out_dir.join("trials.jsonl")).unwrap();
    assert!(jsonl.lines().count() >= 8);
    assert!(jsonl.lines().all(|l| l.contains("\"stage\"")));

    // Determinism: rerunning reproduces everything except wall time.
    let strip_wall = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap_or_default())
            .collect()
    };
    let first = strip_wall(&csv);
    let status = gpi()
        .args(["run", "--config", config.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let second = strip_wall(&std::fs::read_to_string(out_dir.join("results.csv")).unwrap());
    assert_eq!(first, second);

    let fig = dir.join("fig.svg");
    let status = gpi()
        .args([
            "plot",
            "--input",
            out_dir.join("results.csv").to_str().unwrap(),
            "--out",
            fig.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let svg = std::fs::read_to_string(&fig).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("bee-gpi") && svg.contains("bpi-ucrl"));

    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn gpi_seed_env_overrides_base_seed() {
    let dir = temp_dir("seed");
    let out_dir = dir.join("results");
    let config = write_config(&dir, &out_dir);
    let status = gpi()
        .args(["run", "--config", config.to_str().unwrap()])
        .env("GPI_SEED", "999")
        .status()
        .unwrap();
    assert!(status.success());
    let with_env = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let status = gpi()
        .args(["run", "--config", config.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let without_env = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let seeds = |text: &str| -> Vec<String> {
        text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect()
    };
    assert_ne!(seeds(&with_env), seeds(&without_env));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn verify_subcommand_filters() {
    let output = gpi().args(["verify", "--filter", "tree"]).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("PASS tree-identity"));
    assert!(!stdout.contains("kl-grid"));

    let output = gpi().args(["verify", "--filter", "nothing-matches"]).output().unwrap();
    assert!(!output.status.success());
}

#[test]
fn instance_dump_round_trips() {
    let dir = temp_dir("instance");
    let path = dir.join("mdp.json");
    let status = gpi()
        .args([
            "instance",
            "--family",
            "uniform",
            "--params",
            "s=10,a=4,h=8,r=0.4,eps=0.05",
            "--dump",
            path.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let mdp = gpi_core::mdp::TabularMdp::from_json(&text).unwrap();
    let (v_star, _) = gpi_core::mdp::optimal_value_and_policy(&mdp);
    assert!((v_star - 1.8).abs() < 1e-10);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn run_rejects_boundary_mu0_config() {
    let dir = temp_dir("boundary");
    let config = dir.join("config.json");
    // mu0 = 0 equals V* of the zero-reward instance exactly.
    std::fs::write(
        &config,
        r#"{
  "instance": {"family": "zero_reward", "s": 2, "a": 2, "h": 2},
  "algorithms": ["bee-gpi"],
  "mu0_grid": [0.0],
  "delta": 0.1,
  "trials": 1,
  "base_seed": 1
}"#,
    )
    .unwrap();
    let output = gpi()
        .args(["run", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("boundary"), "stderr: {stderr}");
    let _ = std::fs::remove_dir_all(&dir);
}
