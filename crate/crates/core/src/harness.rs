//! Batch experiment runner: config loading and validation, seed derivation,
//! trial execution (optionally in parallel), results persistence, summaries,
//! and the budget-compliance auditor over the per-phase logs.
//!
//! Correctness of every verdict is oracle-checked against the true kernels
//! here; the algorithms themselves never see them.

use crate::algo::{run_bee_gpi, GpiVerdict, TrueEnv, DEFAULT_PHASE_CAP};
use crate::baseline::{run_bpi_ucrl, BpiVerdict};
use crate::error::Error;
use crate::instances;
use crate::mdp::{evaluate_policy, optimal_value_and_policy, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

pub const DEFAULT_EPISODE_CAP: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "bee-gpi")]
    BeeGpi,
    #[serde(rename = "bpi-ucrl")]
    BpiUcrl,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::BeeGpi => "bee-gpi",
            AlgorithmKind::BpiUcrl => "bpi-ucrl",
        })
    }
}

/// Instance family plus parameters, addressable by name from config files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InstanceSpec {
    SingleChain {
        h: usize,
        #[serde(default = "default_reward_site")]
        reward_site: usize,
    },
    DoubleChain {
        h: usize,
        #[serde(default = "default_reward_site")]
        reward_site: usize,
    },
    Uniform {
        s: usize,
        a: usize,
        h: usize,
        r: f64,
        eps: f64,
    },
    Tree {
        s: usize,
        a: usize,
        h: usize,
        r: f64,
    },
    ZeroReward {
        s: usize,
        a: usize,
        h: usize,
    },
}

fn default_reward_site() -> usize {
    3
}

impl InstanceSpec {
    pub fn build(&self) -> Result<TabularMdp, Error> {
        match *self {
            InstanceSpec::SingleChain { h, reward_site } => instances::chain(h, 0, reward_site),
            InstanceSpec::DoubleChain { h, reward_site } => instances::chain(h, 1, reward_site),
            InstanceSpec::Uniform { s, a, h, r, eps } => instances::uniform_instance(s, a, h, r, eps),
            InstanceSpec::Tree { s, a, h, r } => instances::tree_instance(s, a, h, r),
            InstanceSpec::ZeroReward { s, a, h } => instances::zero_reward(s, a, h),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InstanceSpec::SingleChain { .. } => "single_chain",
            InstanceSpec::DoubleChain { .. } => "double_chain",
            InstanceSpec::Uniform { .. } => "uniform",
            InstanceSpec::Tree { .. } => "tree",
            InstanceSpec::ZeroReward { .. } => "zero_reward",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<AlgorithmKind>,
    pub mu0_grid: Vec<f64>,
    pub delta: f64,
    pub trials: u32,
    pub base_seed: u64,
    #[serde(default = "default_phase_cap")]
    pub phase_cap: u32,
    #[serde(default = "default_episode_cap")]
    pub episode_cap: u64,
    #[serde(default = "default_lcb_factor")]
    pub lcb_variance_factor: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_phase_cap() -> u32 {
    DEFAULT_PHASE_CAP
}

fn default_episode_cap() -> u64 {
    DEFAULT_EPISODE_CAP
}

fn default_lcb_factor() -> f64 {
    1.0
}

fn default_output_dir() -> String {
    "results".into()
}

impl ExperimentConfig {
    /// Parse a config file. `GPI_SEED`, when set, overrides the base seed.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)?;
        if let Ok(seed) = std::env::var("GPI_SEED") {
            config.base_seed = seed
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("GPI_SEED = {seed:?} is not a u64")))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Reject configs the experiment protocol excludes, in particular any
    /// mu0 sitting exactly on the boundary V* (where no PAC algorithm can
    /// stop in finite expected time).
    pub fn validate(&self) -> Result<(), Error> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.mu0_grid.is_empty() {
            return Err(Error::InvalidConfig("mu0 grid must be nonempty".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidConfig("at least one algorithm is required".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        if self.lcb_variance_factor != 1.0 && self.lcb_variance_factor != 4.0 {
            return Err(Error::InvalidConfig(
                "lcb_variance_factor must be 1 (algorithm box) or 4 (appendix event)".into(),
            ));
        }
        let mdp = self.instance.build()?;
        let (v_star, _) = optimal_value_and_policy(&mdp);
        for &mu0 in &self.mu0_grid {
            if mu0 == v_star {
                return Err(Error::InvalidConfig(format!(
                    "mu0 = {mu0} equals V* exactly; the boundary instance is excluded"
                )));
            }
            if self.algorithms.contains(&AlgorithmKind::BpiUcrl) && mu0 >= v_star {
                return Err(Error::InvalidConfig(format!(
                    "bpi-ucrl needs the oracle accuracy eps = V* - mu0 > 0, but mu0 = {mu0} >= V* = {v_star}"
                )));
            }
        }
        Ok(())
    }
}

/// One finished trial, as persisted to CSV.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub seed: u64,
    pub algorithm: AlgorithmKind,
    pub mu0: f64,
    pub tau: u64,
    pub verdict: &'static str,
    pub verdict_correct: bool,
    pub wall_ms: u64,
}

/// One per-stage entry of the JSON-lines trial log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseLogRecord {
    pub trial: u32,
    pub k: u32,
    pub stage: String,
    pub episodes: u64,
    pub v_bar_root: f64,
    pub v_under_root: f64,
    pub verdict: String,
    pub algorithm: String,
    pub mu0: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub algorithm: AlgorithmKind,
    pub mu0: f64,
    pub trials: u32,
    pub mean_tau: f64,
    pub std_tau: f64,
    pub correct_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub records: Vec<TrialRecord>,
    pub logs: Vec<PhaseLogRecord>,
    pub summaries: Vec<CellSummary>,
}

impl ExperimentResults {
    pub fn any_aborted(&self) -> bool {
        self.records.iter().any(|r| r.verdict == "aborted")
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pure function of (base seed, algorithm, mu0, trial): any cell can be
/// reproduced on its own.
pub fn derive_child_seed(base_seed: u64, algorithm: AlgorithmKind, mu0: f64, trial: u32) -> u64 {
    let alg_tag = match algorithm {
        AlgorithmKind::BeeGpi => 0x6265_6567_7069_0001u64,
        AlgorithmKind::BpiUcrl => 0x6270_6975_6372_0002u64,
    };
    let mut x = splitmix64(base_seed ^ alg_tag);
    x = splitmix64(x ^ mu0.to_bits());
    splitmix64(x ^ trial as u64)
}

/// Everything a single trial needs besides its cell coordinates.
struct TrialContext<'a> {
    mdp: &'a TabularMdp,
    v_star: f64,
    delta: f64,
    phase_cap: u32,
    episode_cap: u64,
    lcb_variance_factor: f64,
}

/// Run one (algorithm, mu0, trial) cell with its derived seed.
pub fn run_single_trial(
    mdp: &TabularMdp,
    config: &ExperimentConfig,
    algorithm: AlgorithmKind,
    mu0: f64,
    trial: u32,
) -> Result<(TrialRecord, Vec<PhaseLogRecord>), Error> {
    let (v_star, _) = optimal_value_and_policy(mdp);
    let ctx = TrialContext {
        mdp,
        v_star,
        delta: config.delta,
        phase_cap: config.phase_cap,
        episode_cap: config.episode_cap,
        lcb_variance_factor: config.lcb_variance_factor,
    };
    run_trial_inner(&ctx, config.base_seed, algorithm, mu0, trial)
}

fn run_trial_inner(
    ctx: &TrialContext<'_>,
    base_seed: u64,
    algorithm: AlgorithmKind,
    mu0: f64,
    trial: u32,
) -> Result<(TrialRecord, Vec<PhaseLogRecord>), Error> {
    let seed = derive_child_seed(base_seed, algorithm, mu0, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = TrueEnv::new(ctx.mdp);
    let positive = ctx.v_star > mu0;
    let start = Instant::now();
    let mut logs = Vec::new();
    let (tau, verdict, verdict_correct) = match algorithm {
        AlgorithmKind::BeeGpi => {
            let out = run_bee_gpi(
                &env,
                mu0,
                ctx.delta,
                &mut rng,
                ctx.phase_cap,
                ctx.lcb_variance_factor,
            )?;
            for phase in &out.phases {
                logs.push(PhaseLogRecord {
                    trial,
                    k: phase.k,
                    stage: "explore".into(),
                    episodes: phase.exploration_episodes,
                    v_bar_root: phase.v_bar_root,
                    v_under_root: phase.v_under_root,
                    verdict: phase.oracle_verdict.into(),
                    algorithm: algorithm.to_string(),
                    mu0,
                });
                if phase.oracle_verdict == "policy-found" {
                    logs.push(PhaseLogRecord {
                        trial,
                        k: phase.k,
                        stage: "exploit".into(),
                        episodes: phase.exploitation_episodes,
                        v_bar_root: phase.v_bar_root,
                        v_under_root: phase.v_under_root,
                        verdict: if phase.accepted { "accepted" } else { "rejected" }.into(),
                        algorithm: algorithm.to_string(),
                        mu0,
                    });
                }
            }
            let correct = match &out.verdict {
                GpiVerdict::Qualified(pi) => {
                    positive && evaluate_policy(ctx.mdp, pi)? >= mu0
                }
                GpiVerdict::DeclaredNegative => !positive,
                GpiVerdict::Aborted => false,
            };
            (out.tau, out.verdict.label(), correct)
        }
        AlgorithmKind::BpiUcrl => {
            // The baseline receives the oracle accuracy parameter.
            let epsilon = ctx.v_star - mu0;
            let out = run_bpi_ucrl(&env, epsilon, ctx.delta, &mut rng, ctx.episode_cap)?;
            logs.push(PhaseLogRecord {
                trial,
                k: 0,
                stage: "bpi-baseline".into(),
                episodes: out.tau,
                v_bar_root: out.final_v_bar_root,
                v_under_root: out.final_v_under_root,
                verdict: out.verdict.label().into(),
                algorithm: algorithm.to_string(),
                mu0,
            });
            let correct = match &out.verdict {
                BpiVerdict::Policy(pi) => evaluate_policy(ctx.mdp, pi)? >= mu0,
                BpiVerdict::Aborted => false,
            };
            (out.tau, out.verdict.label(), correct)
        }
    };
    let record = TrialRecord {
        trial,
        seed,
        algorithm,
        mu0,
        tau,
        verdict,
        verdict_correct,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    Ok((record, logs))
}

/// Run the whole grid. `jobs = 1` runs sequentially; larger values fan trials
/// out over a rayon pool (requires the `parallel` feature; without it the
/// runner falls back to sequential). Results are ordered deterministically
/// regardless of scheduling.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults, Error> {
    config.validate()?;
    let mdp = config.instance.build()?;
    let (v_star, _) = optimal_value_and_policy(&mdp);
    let ctx = TrialContext {
        mdp: &mdp,
        v_star,
        delta: config.delta,
        phase_cap: config.phase_cap,
        episode_cap: config.episode_cap,
        lcb_variance_factor: config.lcb_variance_factor,
    };
    let mut cells = Vec::new();
    for &algorithm in &config.algorithms {
        for &mu0 in &config.mu0_grid {
            for trial in 0..config.trials {
                cells.push((algorithm, mu0, trial));
            }
        }
    }

    let outputs = execute_cells(&ctx, config.base_seed, &cells, jobs)?;

    let mut records = Vec::with_capacity(cells.len());
    let mut logs = Vec::new();
    for (record, mut trial_logs) in outputs {
        records.push(record);
        logs.append(&mut trial_logs);
    }
    let summaries = summarize(&records);
    Ok(ExperimentResults {
        records,
        logs,
        summaries,
    })
}

#[cfg(feature = "parallel")]
fn execute_cells(
    ctx: &TrialContext<'_>,
    base_seed: u64,
    cells: &[(AlgorithmKind, f64, u32)],
    jobs: usize,
) -> Result<Vec<(TrialRecord, Vec<PhaseLogRecord>)>, Error> {
    use rayon::prelude::*;
    if jobs == 1 {
        return cells
            .iter()
            .map(|&(alg, mu0, trial)| run_trial_inner(ctx, base_seed, alg, mu0, trial))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("could not build thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(alg, mu0, trial)| run_trial_inner(ctx, base_seed, alg, mu0, trial))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn execute_cells(
    ctx: &TrialContext<'_>,
    base_seed: u64,
    cells: &[(AlgorithmKind, f64, u32)],
    _jobs: usize,
) -> Result<Vec<(TrialRecord, Vec<PhaseLogRecord>)>, Error> {
    cells
        .iter()
        .map(|&(alg, mu0, trial)| run_trial_inner(ctx, base_seed, alg, mu0, trial))
        .collect()
}

pub fn summarize(records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<(AlgorithmKind, f64)> = Vec::new();
    for r in records {
        if !cells.iter().any(|&(a, m)| a == r.algorithm && m == r.mu0) {
            cells.push((r.algorithm, r.mu0));
        }
    }
    cells
        .into_iter()
        .map(|(algorithm, mu0)| {
            let taus: Vec<f64> = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.mu0 == mu0)
                .map(|r| r.tau as f64)
                .collect();
            let n = taus.len() as f64;
            let mean = taus.iter().sum::<f64>() / n;
            let var = if taus.len() > 1 {
                taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let correct = records
                .iter()
                .filter(|r| r.algorithm == algorithm && r.mu0 == mu0 && r.verdict_correct)
                .count() as f64;
            CellSummary {
                algorithm,
                mu0,
                trials: taus.len() as u32,
                mean_tau: mean,
                std_tau: var.sqrt(),
                correct_rate: correct / n,
            }
        })
        .collect()
}

pub const CSV_HEADER: &str = "trial,seed,algorithm,mu0,tau,verdict,verdict_correct,wall_ms";

pub fn results_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.trial, r.seed, r.algorithm, r.mu0, r.tau, r.verdict, r.verdict_correct, r.wall_ms
        ));
    }
    out
}

/// Parse back what `results_to_csv` wrote (for the plot command).
pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>, Error> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header.trim() == CSV_HEADER => {}
        other => {
            return Err(Error::InvalidConfig(format!(
                "unexpected CSV header: {other:?}"
            )))
        }
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let algorithm = match fields[2] {
            "bee-gpi" => AlgorithmKind::BeeGpi,
            "bpi-ucrl" => AlgorithmKind::BpiUcrl,
            other => {
                return Err(Error::InvalidConfig(format!("unknown algorithm {other:?}")))
            }
        };
        fn parse<T: std::str::FromStr>(what: &str, v: &str, lineno: usize) -> Result<T, Error> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("line {}: bad {what}: {v:?}", lineno + 2)))
        }
        records.push(TrialRecord {
            trial: parse("trial", fields[0], lineno)?,
            seed: parse("seed", fields[1], lineno)?,
            algorithm,
            mu0: parse("mu0", fields[3], lineno)?,
            tau: parse("tau", fields[4], lineno)?,
            verdict: match fields[5] {
                "qualified" => "qualified",
                "negative" => "negative",
                "policy" => "policy",
                "aborted" => "aborted",
                other => return Err(Error::InvalidConfig(format!("unknown verdict {other:?}"))),
            },
            verdict_correct: fields[6] == "true",
            wall_ms: parse("wall_ms", fields[7], lineno)?,
        });
    }
    Ok(records)
}

pub fn write_results(dir: &Path, results: &ExperimentResults) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("results.csv"), results_to_csv(&results.records))?;
    let mut jsonl = std::fs::File::create(dir.join("trials.jsonl"))?;
    for log in &results.logs {
        serde_json::to_writer(&mut jsonl, log)?;
        jsonl.write_all(b"\n")?;
    }
    Ok(())
}

pub fn summary_table(summaries: &[CellSummary]) -> String {
    let mut out = String::from("algorithm   mu0      mean_tau      std_tau  correct\n");
    for s in summaries {
        out.push_str(&format!(
            "{:<10} {:>5} {:>12.1} {:>12.1} {:>7.2}\n",
            s.algorithm.to_string(),
            s.mu0,
            s.mean_tau,
            s.std_tau,
            s.correct_rate
        ));
    }
    out
}

/// A single budget violation found by the auditor.
#[derive(Debug, Clone)]
pub struct BudgetViolation {
    pub algorithm: String,
    pub mu0: f64,
    pub trial: u32,
    pub k: u32,
    pub detail: String,
}

/// Check every logged BEE-GPI trial against the budgets: cumulative
/// exploration episodes at the end of phase k never exceed T_k^ee, and
/// per-phase exploitation N never exceeds T_k^et - 1.
pub fn audit_budgets(
    logs: &[PhaseLogRecord],
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    delta: f64,
) -> Vec<BudgetViolation> {
    use crate::algo::PhaseSchedule;
    let schedule = PhaseSchedule::default();
    let mut violations = Vec::new();
    // Group by (mu0 bits, trial); logs arrive phase-ordered within a trial.
    let mut keys: Vec<(u64, u32)> = Vec::new();
    for log in logs.iter().filter(|l| l.algorithm == "bee-gpi") {
        let key = (log.mu0.to_bits(), log.trial);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (mu0_bits, trial) in keys {
        let mu0 = f64::from_bits(mu0_bits);
        let mut cumulative_exploration = 0u64;
        for log in logs.iter().filter(|l| {
            l.algorithm == "bee-gpi" && l.mu0.to_bits() == mu0_bits && l.trial == trial
        }) {
            match log.stage.as_str() {
                "explore" => {
                    cumulative_exploration += log.episodes;
                    let budget = schedule.exploration_budget(log.k, num_states, num_actions, horizon);
                    if cumulative_exploration > budget {
                        violations.push(BudgetViolation {
                            algorithm: log.algorithm.clone(),
                            mu0,
                            trial,
                            k: log.k,
                            detail: format!(
                                "cumulative exploration {cumulative_exploration} > T_ee {budget}"
                            ),
                        });
                    }
                }
                "exploit" => {
                    let budget = schedule.exploitation_budget(log.k, horizon, delta);
                    if log.episodes > budget - 1 {
                        violations.push(BudgetViolation {
                            algorithm: log.algorithm.clone(),
                            mu0,
                            trial,
                            k: log.k,
                            detail: format!("exploitation N {} > T_et - 1 = {}", log.episodes, budget - 1),
                        });
                    }
                }
                _ => {}
            }
        }
    }
    violations
}
