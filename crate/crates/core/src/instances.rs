//! Benchmark instance families: the Single/Double Chain pair from the
//! experiments, the Uniform and Tree hard-instance families with their
//! closed-form optimal values, and the per-(state, round) action-permutation
//! operator.
//!
//! States are 0-based; the named states `s_good` and `s_bad` of the Uniform
//! and Tree families map to the last two indices (S-2 and S-1).

use crate::error::Error;
use crate::mdp::{Policy, TabularMdp};

/// Chain walk over states {0,1,2,3} with actions {left, right}: the intended
/// direction moves with probability 0.9, the reverse with 0.1, both clamped
/// at the ends. These chain walks are conventionally described without a
/// reward function, so the one here is a choice: pay 1 at the far state
/// (index 3) for every action and round, which keeps the usual thresholds up
/// to 3 on the positive side at H = 8. Substitute `reward_site` to study a
/// different placement.
pub fn chain(horizon: usize, start_state: usize, reward_site: usize) -> Result<TabularMdp, Error> {
    const S: usize = 4;
    const A: usize = 2;
    if horizon == 0 {
        return Err(Error::InvalidParameter("chain requires H >= 1".into()));
    }
    if start_state >= S || reward_site >= S {
        return Err(Error::InvalidParameter(format!(
            "chain start/reward states must lie in [0, {S})"
        )));
    }
    let mut rewards = vec![0.0; horizon * S * A];
    let mut transitions = vec![0.0; horizon * S * A * S];
    for h in 0..horizon {
        for s in 0..S {
            let left = s.saturating_sub(1);
            let right = (s + 1).min(S - 1);
            for a in 0..A {
                let pair = (h * S + s) * A + a;
                let (intended, reverse) = if a == 0 { (left, right) } else { (right, left) };
                transitions[pair * S + intended] += 0.9;
                transitions[pair * S + reverse] += 0.1;
                if s == reward_site {
                    rewards[pair] = 1.0;
                }
            }
        }
    }
    let mut initial = vec![0.0; S];
    initial[start_state] = 1.0;
    TabularMdp::new(S, A, horizon, rewards, transitions, initial)
}

/// Single Chain: always starts at state 0.
pub fn single_chain(horizon: usize) -> TabularMdp {
    chain(horizon, 0, 3).expect("valid chain parameters")
}

/// Double Chain: always starts at state 1.
pub fn double_chain(horizon: usize) -> TabularMdp {
    chain(horizon, 1, 3).expect("valid chain parameters")
}

/// Uniform Instance (S, A, H, r, eps): interior states [0, S-2) bounce into
/// s_good with probability r+eps under action 0 and r otherwise, s_bad with
/// the rest; s_good pays 1 and both absorbing-side states kick back uniformly
/// into the interior. Optimal value H(r+eps)/2.
pub fn uniform_instance(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    r: f64,
    eps: f64,
) -> Result<TabularMdp, Error> {
    if num_states < 3 {
        return Err(Error::InvalidParameter("uniform instance requires S >= 3".into()));
    }
    if num_actions < 2 {
        return Err(Error::InvalidParameter("uniform instance requires A >= 2".into()));
    }
    if horizon == 0 || horizon % 2 != 0 {
        return Err(Error::InvalidParameter("uniform instance requires even H >= 2".into()));
    }
    if !(r > 0.25 && eps > 0.0 && r + eps < 0.75) {
        return Err(Error::InvalidParameter(format!(
            "uniform instance requires 1/4 < r < r+eps < 3/4, got r={r}, eps={eps}"
        )));
    }
    let (s_n, a_n, h_n) = (num_states, num_actions, horizon);
    let interior = s_n - 2;
    let s_good = s_n - 2;
    let s_bad = s_n - 1;
    let mut rewards = vec![0.0; h_n * s_n * a_n];
    let mut transitions = vec![0.0; h_n * s_n * a_n * s_n];
    for h in 0..h_n {
        for a in 0..a_n {
            for s in 0..interior {
                let pair = (h * s_n + s) * a_n + a;
                let p_good = if a == 0 { r + eps } else { r };
                transitions[pair * s_n + s_good] = p_good;
                transitions[pair * s_n + s_bad] = 1.0 - p_good;
            }
            for &s in &[s_good, s_bad] {
                let pair = (h * s_n + s) * a_n + a;
                for target in 0..interior {
                    transitions[pair * s_n + target] = 1.0 / interior as f64;
                }
                if s == s_good {
                    rewards[pair] = 1.0;
                }
            }
        }
    }
    let mut initial = vec![0.0; s_n];
    for s in 0..interior {
        initial[s] = 1.0 / interior as f64;
    }
    TabularMdp::new(s_n, a_n, h_n, rewards, transitions, initial)
}

/// Tree Instance (S, A, H, r) with S = 2^N + 1: a deterministic binary tree
/// over the first 2^N - 1 states (heap order, root at index 0; actions 0/1
/// descend), with every other action jumping to the absorbing s_good with
/// probability r, else s_bad. Leaves jump under every action. Optimal value
/// (H-1) r, attained by jumping immediately at the root.
pub fn tree_instance(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    r: f64,
) -> Result<TabularMdp, Error> {
    let nodes = num_states.checked_sub(1).filter(|n| n.is_power_of_two() && *n >= 2);
    let Some(nodes) = nodes else {
        return Err(Error::InvalidParameter(format!(
            "tree instance requires S = 2^N + 1 with N >= 1, got S = {num_states}"
        )));
    };
    let depth = nodes.trailing_zeros() as usize; // N
    if num_actions < 3 {
        return Err(Error::InvalidParameter("tree instance requires A >= 3".into()));
    }
    if horizon < 6 * depth + 1 {
        return Err(Error::InvalidParameter(format!(
            "tree instance requires H - 1 >= 6 log2(S-1) = {}, got H = {horizon}",
            6 * depth
        )));
    }
    if !(r > 0.375 && r < 0.625) {
        return Err(Error::InvalidParameter(format!(
            "tree instance requires r in (3/8, 5/8), got {r}"
        )));
    }
    let (s_n, a_n, h_n) = (num_states, num_actions, horizon);
    let tree_count = nodes - 1; // 2^N - 1 tree states
    let internal_count = nodes / 2 - 1; // 2^(N-1) - 1 of them branch
    let s_good = s_n - 2;
    let s_bad = s_n - 1;
    let mut rewards = vec![0.0; h_n * s_n * a_n];
    let mut transitions = vec![0.0; h_n * s_n * a_n * s_n];
    for h in 0..h_n {
        for s in 0..tree_count {
            for a in 0..a_n {
                let pair = (h * s_n + s) * a_n + a;
                if s < internal_count && a == 0 {
                    transitions[pair * s_n + (2 * s + 1)] = 1.0;
                } else if s < internal_count && a == 1 {
                    transitions[pair * s_n + (2 * s + 2)] = 1.0;
                } else {
                    transitions[pair * s_n + s_good] = r;
                    transitions[pair * s_n + s_bad] = 1.0 - r;
                }
            }
        }
        for &s in &[s_good, s_bad] {
            for a in 0..a_n {
                let pair = (h * s_n + s) * a_n + a;
                transitions[pair * s_n + s] = 1.0;
                if s == s_good {
                    rewards[pair] = 1.0;
                }
            }
        }
    }
    let mut initial = vec![0.0; s_n];
    initial[0] = 1.0; // the root
    TabularMdp::new(s_n, a_n, h_n, rewards, transitions, initial)
}

/// All-zero rewards over uniform kernels: a degenerate fixture for negative
/// instances, not one of the benchmark families above.
pub fn zero_reward(num_states: usize, num_actions: usize, horizon: usize) -> Result<TabularMdp, Error> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidParameter("S, A and H must be positive".into()));
    }
    let rewards = vec![0.0; horizon * num_states * num_actions];
    let row: Vec<f64> = vec![1.0 / num_states as f64; num_states];
    let transitions: Vec<f64> = row
        .iter()
        .cycle()
        .take(horizon * num_states * num_actions * num_states)
        .cloned()
        .collect();
    TabularMdp::new(num_states, num_actions, horizon, rewards, transitions, row)
}

/// One bijection on actions per (state, round).
#[derive(Debug, Clone)]
pub struct PermutationSet {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    sigma: Vec<usize>, // [h][s][a] -> permuted action
}

impl PermutationSet {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        sigma: Vec<usize>,
    ) -> Result<Self, Error> {
        if sigma.len() != horizon * num_states * num_actions {
            return Err(Error::DimensionMismatch(format!(
                "sigma has {} entries, expected H*S*A = {}",
                sigma.len(),
                horizon * num_states * num_actions
            )));
        }
        for chunk in sigma.chunks(num_actions) {
            let mut seen = vec![false; num_actions];
            for &img in chunk {
                if img >= num_actions || seen[img] {
                    return Err(Error::InvalidParameter(
                        "each (s, h) entry must be a bijection on [0, A)".into(),
                    ));
                }
                seen[img] = true;
            }
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            sigma,
        })
    }

    pub fn identity(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        let sigma = (0..horizon * num_states * num_actions)
            .map(|i| i % num_actions)
            .collect();
        Self::new(num_states, num_actions, horizon, sigma).expect("identity is a bijection")
    }

    /// Apply the same bijection at every (state, round).
    pub fn uniform(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        perm: &[usize],
    ) -> Result<Self, Error> {
        if perm.len() != num_actions {
            return Err(Error::DimensionMismatch("perm must have A entries".into()));
        }
        let sigma = (0..horizon * num_states)
            .flat_map(|_| perm.iter().cloned())
            .collect();
        Self::new(num_states, num_actions, horizon, sigma)
    }

    #[inline]
    pub fn map(&self, h: usize, s: usize, a: usize) -> usize {
        self.sigma[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn inverse(&self) -> Self {
        let mut sigma = vec![0usize; self.sigma.len()];
        for h in 0..self.horizon {
            for s in 0..self.num_states {
                for a in 0..self.num_actions {
                    let img = self.map(h, s, a);
                    sigma[(h * self.num_states + s) * self.num_actions + img] = a;
                }
            }
        }
        Self {
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            sigma,
        }
    }

    fn matches(&self, mdp: &TabularMdp) -> bool {
        self.num_states == mdp.num_states()
            && self.num_actions == mdp.num_actions()
            && self.horizon == mdp.horizon()
    }
}

/// Relabel actions per (state, round): the permuted instance satisfies
/// `r'(h, s, sigma(a)) = r(h, s, a)` and `p'(.|s, sigma(a)) = p(.|s, a)`.
pub fn permute_instance(mdp: &TabularMdp, sigma: &PermutationSet) -> Result<TabularMdp, Error> {
    if !sigma.matches(mdp) {
        return Err(Error::DimensionMismatch(
            "permutation dimensions do not match the MDP".into(),
        ));
    }
    let (s_n, a_n, h_n) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut rewards = vec![0.0; h_n * s_n * a_n];
    let mut transitions = vec![0.0; h_n * s_n * a_n * s_n];
    for h in 0..h_n {
        for s in 0..s_n {
            for a in 0..a_n {
                let img = sigma.map(h, s, a);
                rewards[(h * s_n + s) * a_n + img] = mdp.reward(h, s, a);
                let src = mdp.transition_row(h, s, a);
                let base = ((h * s_n + s) * a_n + img) * s_n;
                transitions[base..base + s_n].copy_from_slice(src);
            }
        }
    }
    TabularMdp::new(s_n, a_n, h_n, rewards, transitions, mdp.initial_dist().to_vec())
}

/// Compose a policy with the permutation: `(sigma . pi)_h(s) = sigma_{s,h}(pi_h(s))`,
/// so it plays on the permuted instance exactly as `pi` does on the original.
pub fn permute_policy(policy: &Policy, sigma: &PermutationSet) -> Result<Policy, Error> {
    if policy.horizon() != sigma.horizon
        || policy.num_states() != sigma.num_states
        || policy.num_actions() != sigma.num_actions
    {
        return Err(Error::DimensionMismatch(
            "permutation dimensions do not match the policy".into(),
        ));
    }
    let mut actions = Vec::with_capacity(policy.horizon() * policy.num_states());
    for h in 0..policy.horizon() {
        for s in 0..policy.num_states() {
            actions.push(sigma.map(h, s, policy.action(h, s)));
        }
    }
    Policy::new(policy.horizon(), policy.num_states(), policy.num_actions(), actions)
}
