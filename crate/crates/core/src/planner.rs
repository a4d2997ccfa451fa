//! Optimistic and pessimistic backward induction over one history snapshot,
//! and the two stopping predicates of the exploration oracle.
//!
//! The optimistic recursion maximizes each one-step expectation over the KL
//! confidence ball around the empirical row; the pessimistic recursion
//! evaluates the greedy policy with the minimizing row. Unvisited pairs have
//! an undefined radius (beta_p(0)/0), treated as saturated: the optimistic
//! backup takes the best next value outright and the pessimistic backup the
//! worst, the limit of the formula as n -> 0+.

use crate::confidence::{beta_p, kl_max_linear, kl_min_linear, ExplorationHistory};
use crate::error::Error;
use crate::mdp::{KnownRewards, Policy};

/// Optimistic tables, the greedy policy, and its pessimistic evaluation, all
/// at one snapshot of the exploration history.
#[derive(Debug, Clone)]
pub struct PlanningResult {
    pub q_bar: Vec<f64>,      // [h][s][a]
    pub v_bar: Vec<f64>,      // [h][s]
    pub v_bar_root: f64,      // round-0 optimistic value
    pub pi_bar: Policy,       // greedy w.r.t. q_bar, lowest-index ties
    pub v_under_pi: Vec<f64>, // [h][s], pessimistic value of pi_bar
    pub v_under_root: f64,    // round-0 pessimistic value of pi_bar
}

/// Optimistic planning pass. Only dimensions and rewards of the instance are
/// visible; the kernels enter through the history alone.
pub fn plan_optimistic(
    history: &ExplorationHistory,
    known: &KnownRewards<'_>,
    delta: f64,
) -> Result<PlanningResult, Error> {
    let (s_n, a_n, h_n) = (known.num_states, known.num_actions, known.horizon);
    if s_n < 2 {
        return Err(Error::InvalidParameter(
            "planning requires S >= 2 (the exploration bonus is undefined at S = 1)".into(),
        ));
    }
    let kernel = history.empirical_kernel();
    let base_bonus = beta_p(0, delta, s_n, a_n, h_n)?;
    // beta_p(n) = beta_p(0) + (S-1) [log(1 + n/(S-1)) - log 1]; recompute the
    // log term per count rather than the full formula.
    let s1 = (s_n - 1) as f64;
    let bonus = |n: u64| base_bonus + s1 * ((1.0 + n as f64 / s1).ln());

    let mut q_bar = vec![0.0; h_n * s_n * a_n];
    let mut v_bar = vec![0.0; h_n * s_n];
    let mut pi_actions = vec![0usize; h_n * s_n];
    let mut v_next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let terminal = h + 1 == h_n; // V_{H+1} = 0: the inner term vanishes
        let v_next_max = v_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let n = history.count(h, s, a);
                let inner = if terminal {
                    0.0
                } else if n == 0 {
                    v_next_max
                } else {
                    let eps = bonus(n) / n as f64;
                    kl_max_linear(kernel.row(h, s, a), &v_next, eps)?.value
                };
                let q = known.reward(h, s, a) + inner;
                q_bar[(h * s_n + s) * a_n + a] = q;
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            v_bar[h * s_n + s] = best;
            pi_actions[h * s_n + s] = best_a;
        }
        v_next.copy_from_slice(&v_bar[h * s_n..(h + 1) * s_n]);
    }
    let t = history.episodes();
    let v_bar_root = if t == 0 {
        v_next.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    } else {
        kl_max_linear(kernel.initial_row(), &v_next, bonus(t) / t as f64)?.value
    };

    let pi_bar = Policy::new(h_n, s_n, a_n, pi_actions).expect("greedy actions are valid");

    let mut v_under_pi = vec![0.0; h_n * s_n];
    let mut v_next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let terminal = h + 1 == h_n;
        let v_next_min = v_next.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..s_n {
            let a = pi_bar.action(h, s);
            let n = history.count(h, s, a);
            let inner = if terminal {
                0.0
            } else if n == 0 {
                v_next_min
            } else {
                let eps = bonus(n) / n as f64;
                kl_min_linear(kernel.row(h, s, a), &v_next, eps)?.value
            };
            v_under_pi[h * s_n + s] = known.reward(h, s, a) + inner;
        }
        v_next.copy_from_slice(&v_under_pi[h * s_n..(h + 1) * s_n]);
    }
    let v_under_root = if t == 0 {
        v_next.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        kl_min_linear(kernel.initial_row(), &v_next, bonus(t) / t as f64)?.value
    };

    Ok(PlanningResult {
        q_bar,
        v_bar,
        v_bar_root,
        pi_bar,
        v_under_pi,
        v_under_root,
    })
}

/// Pessimistic-optimal tables (min over the ball inside, max over actions
/// outside). BEE-GPI never consumes these; they exist as a diagnostic.
#[derive(Debug, Clone)]
pub struct PessimisticOptimalPlan {
    pub q_under: Vec<f64>, // [h][s][a]
    pub v_under: Vec<f64>, // [h][s]
    pub v_under_root: f64,
}

pub fn plan_pessimistic_optimal(
    history: &ExplorationHistory,
    known: &KnownRewards<'_>,
    delta: f64,
) -> Result<PessimisticOptimalPlan, Error> {
    let (s_n, a_n, h_n) = (known.num_states, known.num_actions, known.horizon);
    if s_n < 2 {
        return Err(Error::InvalidParameter(
            "planning requires S >= 2 (the exploration bonus is undefined at S = 1)".into(),
        ));
    }
    let kernel = history.empirical_kernel();
    let base_bonus = beta_p(0, delta, s_n, a_n, h_n)?;
    let s1 = (s_n - 1) as f64;
    let bonus = |n: u64| base_bonus + s1 * ((1.0 + n as f64 / s1).ln());

    let mut q_under = vec![0.0; h_n * s_n * a_n];
    let mut v_under = vec![0.0; h_n * s_n];
    let mut v_next = vec![0.0; s_n];
    for h in (0..h_n).rev() {
        let terminal = h + 1 == h_n;
        let v_next_min = v_next.iter().cloned().fold(f64::INFINITY, f64::min);
        for s in 0..s_n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..a_n {
                let n = history.count(h, s, a);
                let inner = if terminal {
                    0.0
                } else if n == 0 {
                    v_next_min
                } else {
                    let eps = bonus(n) / n as f64;
                    kl_min_linear(kernel.row(h, s, a), &v_next, eps)?.value
                };
                let q = known.reward(h, s, a) + inner;
                q_under[(h * s_n + s) * a_n + a] = q;
                best = best.max(q);
            }
            v_under[h * s_n + s] = best;
        }
        v_next.copy_from_slice(&v_under[h * s_n..(h + 1) * s_n]);
    }
    let t = history.episodes();
    let v_under_root = if t == 0 {
        v_next.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        kl_min_linear(kernel.initial_row(), &v_next, bonus(t) / t as f64)?.value
    };
    Ok(PessimisticOptimalPlan {
        q_under,
        v_under,
        v_under_root,
    })
}

/// Positive stopping rule: the shifted lower confidence bound clears mu0.
pub fn stop_positive(result: &PlanningResult, c: f64, mu0: f64) -> bool {
    assert!(c > 1.0, "the stopping constant C must exceed 1");
    result.v_under_root - (c - 1.0) * (result.v_bar_root - result.v_under_root) > mu0
}

/// Negative stopping rule: even the optimistic root value sits below mu0
/// (strictly; the boundary is non-stopping).
pub fn stop_negative(result: &PlanningResult, mu0: f64) -> bool {
    result.v_bar_root < mu0
}
