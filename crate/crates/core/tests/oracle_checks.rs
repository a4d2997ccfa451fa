//! Cross-module oracle checks that exercise the public API end to end.

use gpi_core::harness::{run_experiment, AlgorithmKind, ExperimentConfig, InstanceSpec};
use gpi_core::instances;
use gpi_core::mdp::{evaluate_policy, Policy};
use gpi_core::verify::{mc_vs_dp_gap, verify_suite};

#[test]
fn always_right_chain_policy_matches_monte_carlo() {
    let mdp = instances::single_chain(8);
    let always_right = Policy::constant(8, 4, 2, 1).unwrap();
    for seed in [5u64, 6] {
        let (gap, stderr) = mc_vs_dp_gap(&mdp, &always_right, 100_000, seed);
        assert!(gap <= 3.0 * stderr, "gap {gap} vs 3 SE {}", 3.0 * stderr);
    }
}

#[test]
fn verification_suite_is_green() {
    for outcome in verify_suite(None) {
        assert!(outcome.passed, "{}: {}", outcome.name, outcome.detail);
    }
}

fn uniform_pac_config(s: usize, a: usize, h: usize, r: f64, eps: f64, mu0: f64, trials: u32) -> ExperimentConfig {
    ExperimentConfig {
        instance: InstanceSpec::Uniform { s, a, h, r, eps },
        algorithms: vec![AlgorithmKind::BeeGpi],
        mu0_grid: vec![mu0],
        delta: 0.1,
        trials,
        base_seed: 909,
        phase_cap: 40,
        episode_cap: 50_000_000,
        lcb_variance_factor: 1.0,
        output_dir: "unused".into(),
    }
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[test]
fn uniform_instance_pac_batch_scaled() {
    // Same positive-instance structure as the full-scale batch below but at
    // S=5, A=3 so it stays in test-suite time. V* = 6 * 0.5 / 2 = 1.5.
    let config = uniform_pac_config(5, 3, 6, 0.4, 0.1, 1.2, 10);
    let results = run_experiment(&config, jobs()).unwrap();
    let mdp = config.instance.build().unwrap();
    let correct = results.records.iter().filter(|r| r.verdict_correct).count();
    assert!(correct >= 9, "only {correct}/10 correct");
    for r in &results.records {
        assert_ne!(r.verdict, "aborted");
    }
    let _ = evaluate_policy(&mdp, &Policy::constant(6, 5, 3, 1).unwrap()).unwrap();
}

/// The full-scale batch: S=10, A=4, H=8, mu0 = 1.5 at delta = 0.1, 20 seeds,
/// expecting >= 18 correct. Hundreds of thousands of episodes per seed
/// (about 15 minutes of CPU in release mode), so it only runs on request:
/// `cargo test --release -- --ignored`.
#[test]
#[ignore]
fn uniform_instance_pac_batch_full_scale() {
    let config = uniform_pac_config(10, 4, 8, 0.4, 0.05, 1.5, 20);
    let results = run_experiment(&config, jobs()).unwrap();
    let correct = results.records.iter().filter(|r| r.verdict_correct).count();
    assert!(correct >= 18, "only {correct}/20 correct");
}
