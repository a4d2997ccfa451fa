//! Ground-truth tabular episodic MDPs: exact dynamic-programming evaluation
//! and seeded episode simulation. This is the only module that reads the true
//! transition kernels; learning code sees instances through [`KnownRewards`]
//! and the [`Environment`](crate::algo::Environment) trait.

use crate::error::Error;
use rand::RngCore;
use serde::{Deserialize, Serialize};

const DIST_TOL: f64 = 1e-12;

/// A finite-horizon episodic MDP with deterministic rewards in [0, 1].
///
/// States and actions are dense 0-based indices. Rounds are 0-based
/// `0..H`. The fictitious round 0 of the problem formulation is not
/// materialized as a state: `initial_dist` plays the role of its single
/// transition row.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    rewards: Vec<f64>,      // [h][s][a]
    transitions: Vec<f64>,  // [h][s][a][s']
    initial_dist: Vec<f64>, // [s]
}

impl TabularMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self, Error> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::InvalidParameter(
                "S, A and H must all be positive".into(),
            ));
        }
        if rewards.len() != horizon * num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "rewards has {} entries, expected H*S*A = {}",
                rewards.len(),
                horizon * num_states * num_actions
            )));
        }
        if transitions.len() != horizon * num_states * num_actions * num_states {
            return Err(Error::DimensionMismatch(format!(
                "transitions has {} entries, expected H*S*A*S = {}",
                transitions.len(),
                horizon * num_states * num_actions * num_states
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::DimensionMismatch(format!(
                "initial_dist has {} entries, expected S = {}",
                initial_dist.len(),
                num_states
            )));
        }
        for (i, &r) in rewards.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter(format!(
                    "reward {r} at flat index {i} is outside [0, 1]"
                )));
            }
        }
        for row in transitions.chunks(num_states) {
            check_distribution(row)?;
        }
        check_distribution(&initial_dist)?;
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            rewards,
            transitions,
            initial_dist,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.num_states + s) * self.num_actions + a]
    }

    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let base = ((h * self.num_states + s) * self.num_actions + a) * self.num_states;
        &self.transitions[base..base + self.num_states]
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// The agent-visible part of the instance: dimensions and rewards only.
    pub fn known(&self) -> KnownRewards<'_> {
        KnownRewards {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            rewards: &self.rewards,
        }
    }

    pub fn to_json(&self) -> Result<String, Error> {
        let mut rewards = Vec::with_capacity(self.horizon);
        let mut transitions = Vec::with_capacity(self.horizon);
        for h in 0..self.horizon {
            let mut rs = Vec::with_capacity(self.num_states);
            let mut ts = Vec::with_capacity(self.num_states);
            for s in 0..self.num_states {
                rs.push(
                    (0..self.num_actions)
                        .map(|a| self.reward(h, s, a))
                        .collect::<Vec<_>>(),
                );
                ts.push(
                    (0..self.num_actions)
                        .map(|a| self.transition_row(h, s, a).to_vec())
                        .collect::<Vec<_>>(),
                );
            }
            rewards.push(rs);
            transitions.push(ts);
        }
        let doc = MdpJson {
            s: self.num_states,
            a: self.num_actions,
            h: self.horizon,
            rewards,
            transitions,
            initial: self.initial_dist.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let doc: MdpJson = serde_json::from_str(text)?;
        let mut rewards = Vec::with_capacity(doc.h * doc.s * doc.a);
        let mut transitions = Vec::with_capacity(doc.h * doc.s * doc.a * doc.s);
        if doc.rewards.len() != doc.h || doc.transitions.len() != doc.h {
            return Err(Error::DimensionMismatch(
                "outer reward/transition arrays must have H entries".into(),
            ));
        }
        for h in 0..doc.h {
            if doc.rewards[h].len() != doc.s || doc.transitions[h].len() != doc.s {
                return Err(Error::DimensionMismatch(
                    "per-round arrays must have S entries".into(),
                ));
            }
            for s in 0..doc.s {
                if doc.rewards[h][s].len() != doc.a || doc.transitions[h][s].len() != doc.a {
                    return Err(Error::DimensionMismatch(
                        "per-state arrays must have A entries".into(),
                    ));
                }
                for a in 0..doc.a {
                    rewards.push(doc.rewards[h][s][a]);
                    if doc.transitions[h][s][a].len() != doc.s {
                        return Err(Error::DimensionMismatch(
                            "transition rows must have S entries".into(),
                        ));
                    }
                    transitions.extend_from_slice(&doc.transitions[h][s][a]);
                }
            }
        }
        Self::new(doc.s, doc.a, doc.h, rewards, transitions, doc.initial)
    }
}

#[derive(Serialize, Deserialize)]
struct MdpJson {
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "A")]
    a: usize,
    #[serde(rename = "H")]
    h: usize,
    rewards: Vec<Vec<Vec<f64>>>,
    transitions: Vec<Vec<Vec<Vec<f64>>>>,
    initial: Vec<f64>,
}

fn check_distribution(row: &[f64]) -> Result<(), Error> {
    let mut sum = 0.0;
    for &p in row {
        if p < 0.0 || !p.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "entry {p} is negative or non-finite"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(Error::InvalidDistribution(format!(
            "row sums to {sum}, expected 1 within {DIST_TOL}"
        )));
    }
    Ok(())
}

/// Dimensions and rewards of an instance, with the kernels stripped away.
/// Planning code takes this view so it structurally cannot read the truth.
#[derive(Debug, Clone, Copy)]
pub struct KnownRewards<'a> {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    rewards: &'a [f64],
}

impl KnownRewards<'_> {
    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.num_states + s) * self.num_actions + a]
    }
}

/// A deterministic, time-indexed policy: one action per (round, state).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    actions: Vec<usize>, // [h][s]
}

impl Policy {
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        actions: Vec<usize>,
    ) -> Result<Self, Error> {
        if actions.len() != horizon * num_states {
            return Err(Error::DimensionMismatch(format!(
                "policy has {} entries, expected H*S = {}",
                actions.len(),
                horizon * num_states
            )));
        }
        if let Some(&bad) = actions.iter().find(|&&a| a >= num_actions) {
            return Err(Error::InvalidParameter(format!(
                "policy action {bad} is outside [0, {num_actions})"
            )));
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            actions,
        })
    }

    /// Policy playing the same action everywhere.
    pub fn constant(horizon: usize, num_states: usize, num_actions: usize, action: usize) -> Result<Self, Error> {
        Self::new(horizon, num_states, num_actions, vec![action; horizon * num_states])
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn matches(&self, mdp: &TabularMdp) -> bool {
        self.horizon == mdp.horizon
            && self.num_states == mdp.num_states
            && self.num_actions <= mdp.num_actions
    }
}

/// One realized episode: visited states, taken actions, and the (deterministic)
/// rewards summed up.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub total_reward: f64,
}

/// A GPI problem: an instance together with the threshold and tolerance.
#[derive(Debug, Clone)]
pub struct RewardThresholdProblem {
    pub mdp: TabularMdp,
    pub mu0: f64,
    pub delta: f64,
}

impl RewardThresholdProblem {
    pub fn new(mdp: TabularMdp, mu0: f64, delta: f64) -> Result<Self, Error> {
        if !mu0.is_finite() {
            return Err(Error::InvalidParameter("mu0 must be finite".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {delta} must lie in (0, 1)"
            )));
        }
        Ok(Self { mdp, mu0, delta })
    }
}

/// Exact value of a policy from the initial distribution, by backward
/// induction over the true kernels.
pub fn evaluate_policy(mdp: &TabularMdp, policy: &Policy) -> Result<f64, Error> {
    if !policy.matches(mdp) {
        return Err(Error::DimensionMismatch(
            "policy dimensions do not match the MDP".into(),
        ));
    }
    let s_n = mdp.num_states();
    let mut v_next = vec![0.0; s_n];
    let mut v = vec![0.0; s_n];
    for h in (0..mdp.horizon()).rev() {
        for s in 0..s_n {
            let a = policy.action(h, s);
            let row = mdp.transition_row(h, s, a);
            let mut exp = 0.0;
            for sp in 0..s_n {
                exp += row[sp] * v_next[sp];
            }
            v[s] = mdp.reward(h, s, a) + exp;
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    let mut out = 0.0;
    for s in 0..s_n {
        out += mdp.initial_dist()[s] * v_next[s];
    }
    Ok(out)
}

/// Optimal value and an optimal deterministic policy by Bellman backward
/// induction. Argmax ties break toward the lowest action index.
pub fn optimal_value_and_policy(mdp: &TabularMdp) -> (f64, Policy) {
    let (s_n, a_n, h_n) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut v_next = vec![0.0; s_n];
    let mut v = vec![0.0; s_n];
    let mut actions = vec![0usize; h_n * s_n];
    for h in (0..h_n).rev() {
        for s in 0..s_n {
            let mut best_q = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..a_n {
                let row = mdp.transition_row(h, s, a);
                let mut exp = 0.0;
                for sp in 0..s_n {
                    exp += row[sp] * v_next[sp];
                }
                let q = mdp.reward(h, s, a) + exp;
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            v[s] = best_q;
            actions[h * s_n + s] = best_a;
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    let mut value = 0.0;
    for s in 0..s_n {
        value += mdp.initial_dist()[s] * v_next[s];
    }
    let policy = Policy::new(h_n, s_n, a_n, actions).expect("constructed actions are valid");
    (value, policy)
}

/// Draw one episode of `policy` on the true instance.
pub fn sample_episode(mdp: &TabularMdp, policy: &Policy, rng: &mut dyn RngCore) -> Trajectory {
    assert!(policy.matches(mdp), "policy dimensions do not match the MDP");
    let h_n = mdp.horizon();
    let mut states = Vec::with_capacity(h_n);
    let mut actions = Vec::with_capacity(h_n);
    let mut total_reward = 0.0;
    let mut s = sample_categorical(mdp.initial_dist(), rng);
    for h in 0..h_n {
        let a = policy.action(h, s);
        states.push(s);
        actions.push(a);
        total_reward += mdp.reward(h, s, a);
        if h + 1 < h_n {
            s = sample_categorical(mdp.transition_row(h, s, a), rng);
        }
    }
    Trajectory {
        states,
        actions,
        total_reward,
    }
}

/// Inverse-CDF draw from a probability vector. The floating-point tail
/// falls back to the last positive entry so support is never violated.
pub(crate) fn sample_categorical(dist: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rand::Rng::gen(&mut *rng);
    let mut cum = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    dist.iter()
        .rposition(|&p| p > 0.0)
        .expect("distribution has positive mass")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state_deterministic() -> TabularMdp {
        // S=2, A=2, H=1. Action 0 pays 0.3 in state 0 / 0.1 in state 1,
        // action 1 pays 0.9 / 0.2. Transitions are irrelevant at H=1 but must
        // still be rows of a kernel.
        let rewards = vec![0.3, 0.9, 0.1, 0.2];
        let transitions = vec![
            1.0, 0.0, 1.0, 0.0, // state 0, actions 0/1
            0.0, 1.0, 0.0, 1.0, // state 1
        ];
        TabularMdp::new(2, 2, 1, rewards, transitions, vec![0.5, 0.5]).unwrap()
    }

    fn zero_reward(s: usize, a: usize, h: usize) -> TabularMdp {
        let rewards = vec![0.0; h * s * a];
        let row: Vec<f64> = vec![1.0 / s as f64; s];
        let transitions: Vec<f64> = row.iter().cycle().take(h * s * a * s).cloned().collect();
        TabularMdp::new(s, a, h, rewards, transitions, row).unwrap()
    }

    #[test]
    fn rejects_bad_rows() {
        let err = TabularMdp::new(2, 1, 1, vec![0.0; 2], vec![0.6, 0.5, 0.5, 0.5], vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::InvalidDistribution(_))));
        let err = TabularMdp::new(2, 1, 1, vec![0.0, 1.5], vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0]);
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn zero_rewards_evaluate_to_zero() {
        let mdp = zero_reward(3, 2, 5);
        let pi = Policy::constant(5, 3, 2, 1).unwrap();
        assert_eq!(evaluate_policy(&mdp, &pi).unwrap(), 0.0);
    }

    #[test]
    fn optimal_matches_exhaustive_enumeration_2x2x1() {
        let mdp = two_state_deterministic();
        let (v_star, pi_star) = optimal_value_and_policy(&mdp);
        // 4 deterministic policies at S=2, A=2, H=1.
        let mut best = f64::NEG_INFINITY;
        for a0 in 0..2 {
            for a1 in 0..2 {
                let pi = Policy::new(1, 2, 2, vec![a0, a1]).unwrap();
                best = best.max(evaluate_policy(&mdp, &pi).unwrap());
            }
        }
        assert!((v_star - best).abs() < 1e-15);
        assert!((evaluate_policy(&mdp, &pi_star).unwrap() - v_star).abs() < 1e-15);
        assert!((v_star - 0.55).abs() < 1e-15); // (0.9 + 0.2) / 2
    }

    #[test]
    fn bellman_ties_break_low() {
        // Both actions identical: the greedy policy must pick action 0.
        let rewards = vec![0.5, 0.5];
        let mdp = TabularMdp::new(1, 2, 1, rewards, vec![1.0, 1.0], vec![1.0]).unwrap();
        let (_, pi) = optimal_value_and_policy(&mdp);
        assert_eq!(pi.action(0, 0), 0);
    }

    #[test]
    fn deterministic_mdp_has_unique_trajectory() {
        // Point-mass kernels: any seed yields the same path. State 1 pays in
        // round 1, which the unique trajectory 0 -> 1 collects.
        let rewards = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let transitions = vec![
            0.0, 1.0, 0.0, 1.0, // h=0, s=0
            1.0, 0.0, 1.0, 0.0, // h=0, s=1
            0.0, 1.0, 0.0, 1.0, // h=1, s=0
            1.0, 0.0, 1.0, 0.0, // h=1, s=1
        ];
        let mdp = TabularMdp::new(2, 2, 2, rewards, transitions, vec![1.0, 0.0]).unwrap();
        let pi = Policy::constant(2, 2, 2, 0).unwrap();
        let mut rng_a = ChaCha8Rng::seed_from_u64(1);
        let mut rng_b = ChaCha8Rng::seed_from_u64(999);
        let ta = sample_episode(&mdp, &pi, &mut rng_a);
        let tb = sample_episode(&mdp, &pi, &mut rng_b);
        assert_eq!(ta.states, vec![0, 1]);
        assert_eq!(ta, tb);
        assert!((ta.total_reward - 1.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_bitwise_identical_trajectories() {
        let mdp = crate::instances::single_chain(8);
        let (_, pi) = optimal_value_and_policy(&mdp);
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            assert_eq!(sample_episode(&mdp, &pi, &mut a), sample_episode(&mdp, &pi, &mut b));
        }
    }

    #[test]
    fn trajectory_reward_consistent_with_reward_table() {
        let mdp = crate::instances::single_chain(8);
        let (_, pi) = optimal_value_and_policy(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let traj = sample_episode(&mdp, &pi, &mut rng);
            let direct: f64 = (0..8)
                .map(|h| mdp.reward(h, traj.states[h], traj.actions[h]))
                .sum();
            assert!((traj.total_reward - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn sampled_transitions_have_positive_true_probability() {
        let mdp = crate::instances::double_chain(6);
        let (_, pi) = optimal_value_and_policy(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let traj = sample_episode(&mdp, &pi, &mut rng);
            assert!(mdp.initial_dist()[traj.states[0]] > 0.0);
            for h in 0..5 {
                let row = mdp.transition_row(h, traj.states[h], traj.actions[h]);
                assert!(row[traj.states[h + 1]] > 0.0);
            }
        }
    }

    #[test]
    fn policy_values_stay_in_episode_range() {
        // 0 <= V_0^pi <= H for arbitrary instances and policies.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let (s, a, h) = (
                2 + rand::Rng::gen_range(&mut rng, 0..3usize),
                1 + rand::Rng::gen_range(&mut rng, 0..3usize),
                1 + rand::Rng::gen_range(&mut rng, 0..5usize),
            );
            let rewards: Vec<f64> = (0..h * s * a).map(|_| rand::Rng::gen::<f64>(&mut rng)).collect();
            let mut transitions = Vec::new();
            for _ in 0..h * s * a {
                let raw: Vec<f64> = (0..s).map(|_| rand::Rng::gen::<f64>(&mut rng) + 1e-3).collect();
                let tot: f64 = raw.iter().sum();
                transitions.extend(raw.iter().map(|x| x / tot));
            }
            let initial = vec![1.0 / s as f64; s];
            let mdp = TabularMdp::new(s, a, h, rewards, transitions, initial).unwrap();
            let actions: Vec<usize> = (0..h * s).map(|_| rand::Rng::gen_range(&mut rng, 0..a)).collect();
            let pi = Policy::new(h, s, a, actions).unwrap();
            let v = evaluate_policy(&mdp, &pi).unwrap();
            assert!(v >= 0.0 && v <= h as f64 + 1e-12, "value {v} outside [0, {h}]");
            let (v_star, _) = optimal_value_and_policy(&mdp);
            assert!(v_star >= v - 1e-12);
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mdp = crate::instances::double_chain(5);
        let text = mdp.to_json().unwrap();
        let back = TabularMdp::from_json(&text).unwrap();
        assert_eq!(mdp, back);
        // Non-dyadic probabilities survive as well.
        let u = crate::instances::uniform_instance(9, 3, 4, 0.4, 0.05).unwrap();
        let back = TabularMdp::from_json(&u.to_json().unwrap()).unwrap();
        assert_eq!(u, back);
    }

    #[test]
    fn threshold_problem_validation() {
        let mdp = zero_reward(2, 2, 2);
        assert!(RewardThresholdProblem::new(mdp.clone(), 0.5, 0.1).is_ok());
        assert!(RewardThresholdProblem::new(mdp.clone(), f64::NAN, 0.1).is_err());
        assert!(RewardThresholdProblem::new(mdp, 0.5, 1.0).is_err());
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::new(2, 2, 2, vec![0, 1, 1, 2]).is_err());
        assert!(Policy::new(2, 2, 2, vec![0, 1, 1]).is_err());
        let mdp = zero_reward(3, 2, 2);
        let pi = Policy::constant(2, 2, 2, 0).unwrap();
        assert!(evaluate_policy(&mdp, &pi).is_err());
    }
}
