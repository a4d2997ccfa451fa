use criterion::{criterion_group, criterion_main, Criterion};
use gpi_core::confidence::ExplorationHistory;
use gpi_core::harness::{run_experiment, AlgorithmKind, ExperimentConfig, InstanceSpec};
use gpi_core::instances::single_chain;
use gpi_core::mdp::{optimal_value_and_policy, sample_episode};
use gpi_core::planner::plan_optimistic;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_config() -> ExperimentConfig {
    ExperimentConfig {
        instance: InstanceSpec::SingleChain { h: 8, reward_site: 3 },
        algorithms: vec![AlgorithmKind::BeeGpi],
        mu0_grid: vec![1.0, 1.5],
        delta: 0.05,
        trials: 4,
        base_seed: 2024,
        phase_cap: 40,
        episode_cap: 10_000_000,
        lcb_variance_factor: 1.0,
        output_dir: "results".into(),
    }
}

fn trial_batches(c: &mut Criterion) {
    let config = bench_config();
    let mut group = c.benchmark_group("trial_batch");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| run_experiment(&config, 1).unwrap());
    });
    group.bench_function("parallel", |b| {
        b.iter(|| run_experiment(&config, num_cpus()).unwrap());
    });
    group.finish();
}

fn planning_pass(c: &mut Criterion) {
    let mdp = single_chain(8);
    let (_, pi) = optimal_value_and_policy(&mdp);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut history = ExplorationHistory::new(4, 2, 8);
    for _ in 0..2000 {
        history.update(&sample_episode(&mdp, &pi, &mut rng));
    }
    c.bench_function("plan_optimistic_chain", |b| {
        b.iter(|| plan_optimistic(&history, &mdp.known(), 0.01).unwrap());
    });
}

fn num_cpus() -> usize {
    std::thread::available_parallelism().map_or(2, |n| n.get())
}

criterion_group!(benches, trial_batches, planning_pass);
criterion_main!(benches);
