//! Exploration statistics and the KL confidence machinery.
//!
//! All optimistic and pessimistic backups reduce to one primitive: optimize a
//! linear objective over the KL ball
//!
//! ```text
//!   max / min over q in the simplex of  sum_s q(s) v(s)
//!   subject to  KL(p_hat || q) <= eps
//! ```
//!
//! where `p_hat` is an empirical transition row and `eps = beta_p(n, delta)/n`
//! is the per-pair radius. The maximizer has the form
//! `q(s) = p_hat(s) * nu / (lambda - v(s))` on the support of `p_hat`, with any
//! leftover mass placed on the best coordinate outside the support. We find
//! `lambda` by 1-D bisection on the KL value, which is strictly decreasing in
//! `lambda`; when the best coordinate lies outside the support and the radius
//! is large enough, the multiplier pins to that coordinate's value and the
//! normalizer has a closed form, so no bisection is needed.

use crate::error::Error;
use crate::mdp::Trajectory;

const KL_BISECT_TOL: f64 = 1e-10;
const KL_BISECT_MAX_ITERS: u32 = 200;

/// Per-(round, state, action) visit and transition counts accumulated across
/// all exploration stages, plus the fictitious round-0 slot whose visit count
/// is always `t` and whose transition counts are the realized initial states.
#[derive(Debug, Clone)]
pub struct ExplorationHistory {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    episodes: u64,
    counts: Vec<u64>,         // [h][s][a]
    transition_counts: Vec<u64>, // [h][s][a][s']
    initial_counts: Vec<u64>, // [s]
}

impl ExplorationHistory {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            num_states,
            num_actions,
            horizon,
            episodes: 0,
            counts: vec![0; horizon * num_states * num_actions],
            transition_counts: vec![0; horizon * num_states * num_actions * num_states],
            initial_counts: vec![0; num_states],
        }
    }

    /// Total exploration episodes so far; also the round-0 slot count.
    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    #[inline]
    fn pair(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.num_actions + a
    }

    #[inline]
    pub fn count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.counts[self.pair(h, s, a)]
    }

    #[inline]
    pub fn transition_count(&self, h: usize, s: usize, a: usize, s_next: usize) -> u64 {
        self.transition_counts[self.pair(h, s, a) * self.num_states + s_next]
    }

    pub fn initial_count(&self, s: usize) -> u64 {
        self.initial_counts[s]
    }

    /// Fold one trajectory into the counts, including the round-0 slot.
    pub fn update(&mut self, traj: &Trajectory) {
        assert_eq!(traj.states.len(), self.horizon, "trajectory length mismatch");
        self.episodes += 1;
        self.initial_counts[traj.states[0]] += 1;
        for h in 0..self.horizon {
            let idx = self.pair(h, traj.states[h], traj.actions[h]);
            self.counts[idx] += 1;
            if h + 1 < self.horizon {
                self.transition_counts[idx * self.num_states + traj.states[h + 1]] += 1;
            }
        }
    }

    /// Empirical kernel rows, uniform where a pair is unvisited; the round-0
    /// row is the empirical initial-state frequency.
    pub fn empirical_kernel(&self) -> EmpiricalKernel {
        let s_n = self.num_states;
        let mut rows = vec![0.0; self.counts.len() * s_n];
        for pair in 0..self.counts.len() {
            // The terminal round records no successors; its rows fall back to
            // uniform like unvisited pairs (they never enter a backup anyway).
            let n: u64 = self.transition_counts[pair * s_n..(pair + 1) * s_n].iter().sum();
            let out = &mut rows[pair * s_n..(pair + 1) * s_n];
            if n == 0 {
                out.fill(1.0 / s_n as f64);
            } else {
                for sp in 0..s_n {
                    out[sp] = self.transition_counts[pair * s_n + sp] as f64 / n as f64;
                }
            }
        }
        let mut initial = vec![0.0; s_n];
        if self.episodes == 0 {
            initial.fill(1.0 / s_n as f64);
        } else {
            for s in 0..s_n {
                initial[s] = self.initial_counts[s] as f64 / self.episodes as f64;
            }
        }
        EmpiricalKernel {
            num_states: s_n,
            num_actions: self.num_actions,
            rows,
            initial,
        }
    }

    /// Test fixture: a history in which every (h, s, a) pair was visited
    /// exactly `n` times, successors drawn from the true kernel. Not
    /// realizable by episode replay (per-round sums exceed `t`), so
    /// `is_consistent` does not apply to it.
    #[cfg(test)]
    pub(crate) fn synthetic_equal_visits(
        mdp: &crate::mdp::TabularMdp,
        n: u64,
        rng: &mut dyn rand::RngCore,
    ) -> Self {
        let (s_n, a_n, h_n) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        let mut hist = Self::new(s_n, a_n, h_n);
        hist.episodes = n;
        for s in 0..s_n {
            hist.initial_counts[s] = 0;
        }
        for _ in 0..n {
            let s0 = crate::mdp::sample_categorical(mdp.initial_dist(), rng);
            hist.initial_counts[s0] += 1;
        }
        for h in 0..h_n {
            for s in 0..s_n {
                for a in 0..a_n {
                    let pair = hist.pair(h, s, a);
                    hist.counts[pair] = n;
                    if h + 1 < h_n {
                        let row = mdp.transition_row(h, s, a);
                        for _ in 0..n {
                            let sp = crate::mdp::sample_categorical(row, rng);
                            hist.transition_counts[pair * s_n + sp] += 1;
                        }
                    }
                }
            }
        }
        hist
    }

    /// Counting invariants: transition counts sum to pair counts, pair counts
    /// sum to `t` at every round h >= 1 (the last round stores no successors),
    /// and the round-0 slot count equals `t`.
    pub fn is_consistent(&self) -> bool {
        for pair in 0..self.counts.len() {
            let s_sum: u64 = self.transition_counts[pair * self.num_states..(pair + 1) * self.num_states]
                .iter()
                .sum();
            let h = pair / (self.num_states * self.num_actions);
            if h + 1 < self.horizon && s_sum != self.counts[pair] {
                return false;
            }
        }
        for h in 0..self.horizon {
            let base = h * self.num_states * self.num_actions;
            let round_sum: u64 = self.counts[base..base + self.num_states * self.num_actions]
                .iter()
                .sum();
            if round_sum != self.episodes {
                return false;
            }
        }
        self.initial_counts.iter().sum::<u64>() == self.episodes
    }
}

/// Empirical transition rows p_hat for every (h, s, a), plus the round-0 row.
#[derive(Debug, Clone)]
pub struct EmpiricalKernel {
    num_states: usize,
    num_actions: usize,
    rows: Vec<f64>,
    initial: Vec<f64>,
}

impl EmpiricalKernel {
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let pair = (h * self.num_states + s) * self.num_actions + a;
        &self.rows[pair * self.num_states..(pair + 1) * self.num_states]
    }

    pub fn initial_row(&self) -> &[f64] {
        &self.initial
    }
}

/// Exploration bonus beta_p(t, delta) = log(2SAH/delta) + (S-1) log(e(1 + t/(S-1))).
///
/// Natural logarithms throughout. Undefined at S = 1 (the formula divides by
/// S - 1), which is rejected rather than extrapolated.
pub fn beta_p(t: u64, delta: f64, num_states: usize, num_actions: usize, horizon: usize) -> Result<f64, Error> {
    if num_states < 2 {
        return Err(Error::InvalidParameter(
            "beta_p requires S >= 2 (the bonus divides by S - 1)".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let s1 = (num_states - 1) as f64;
    let lead = (2.0 * num_states as f64 * num_actions as f64 * horizon as f64 / delta).ln();
    Ok(lead + s1 * (1.0 + (1.0 + t as f64 / s1).ln()))
}

/// The companion count bonus beta_cnt(delta) = log(2SAH/delta). It appears
/// only in concentration arguments about visit counts and drives no runtime
/// decision here; it is exposed for reference because beta_p(0, delta) =
/// beta_cnt(delta) + (S - 1).
pub fn beta_cnt(delta: f64, num_states: usize, num_actions: usize, horizon: usize) -> Result<f64, Error> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    Ok((2.0 * num_states as f64 * num_actions as f64 * horizon as f64 / delta).ln())
}

/// KL(p || q) for categorical distributions, with 0 log(0/x) = 0. Returns
/// `f64::INFINITY` when p puts mass where q has none (infeasible direction).
pub fn kl_categorical(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut sum = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            sum += pi * (pi / qi).ln();
        }
    }
    sum.max(0.0)
}

/// Outcome of one KL-ball optimization: the optimal objective value, the
/// optimizing distribution, the dual multiplier at termination, the bisection
/// iteration count, and whether the radius saturated the reachable set (the
/// supremum is then attained only in the limit and `q` is the limit point).
#[derive(Debug, Clone)]
pub struct KlBallSolution {
    pub value: f64,
    pub q: Vec<f64>,
    pub dual: f64,
    pub iterations: u32,
    pub saturated: bool,
}

/// Maximize `sum_s q(s) v(s)` over `KL(p_hat || q) <= eps` on the simplex.
///
/// The KL direction matches the confidence-set definition: first argument the
/// empirical row, second the candidate. Mass may move onto coordinates where
/// `p_hat` is zero (they contribute nothing to the KL), in particular onto the
/// argmax of `v`.
pub fn kl_max_linear(p_hat: &[f64], v: &[f64], eps: f64) -> Result<KlBallSolution, Error> {
    let n = p_hat.len();
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "p_hat has {} entries but v has {}",
            n,
            v.len()
        )));
    }
    if v.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("v contains NaN".into()));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::InvalidParameter(format!("eps = {eps} must be >= 0")));
    }
    validate_distribution(p_hat)?;

    let dot = |q: &[f64]| -> f64 { q.iter().zip(v).map(|(qi, vi)| qi * vi).sum() };

    // eps = 0 forces q = p_hat: any mass moved off the support costs KL > 0.
    if eps == 0.0 {
        return Ok(KlBallSolution {
            value: dot(p_hat),
            q: p_hat.to_vec(),
            dual: 0.0,
            iterations: 0,
            saturated: false,
        });
    }

    let v_max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    // Constant objective: every feasible q scores the same.
    if v_max - v_min <= 1e-12 * v_max.abs().max(1.0) {
        return Ok(KlBallSolution {
            value: dot(p_hat),
            q: p_hat.to_vec(),
            dual: 0.0,
            iterations: 0,
            saturated: false,
        });
    }

    // Lowest-index global argmax, for deterministic limit solutions.
    let argmax = v
        .iter()
        .enumerate()
        .find(|(_, &x)| x == v_max)
        .map(|(i, _)| i)
        .unwrap();

    if eps.is_infinite() {
        // Radius beyond every reachable KL: the supremum max(v) is approached
        // by draining all mass toward the argmax. Return the limit point.
        let mut q = vec![0.0; n];
        q[argmax] = 1.0;
        return Ok(KlBallSolution {
            value: v_max,
            q,
            dual: v_max,
            iterations: 0,
            saturated: true,
        });
    }

    let supp: Vec<usize> = (0..n).filter(|&i| p_hat[i] > 0.0).collect();
    let v_in_max = supp.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    let v_in_min = supp.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
    // Best coordinate with zero empirical mass, if any.
    let outside = (0..n)
        .filter(|&i| p_hat[i] == 0.0)
        .max_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap().then(j.cmp(&i)));

    // KL as a function of the dual multiplier lambda > max v on the support,
    // with q(s) proportional to p(s) / (lambda - v(s)) normalized over the
    // support. Strictly decreasing in lambda, -> 0 as lambda -> infinity.
    let kl_at = |lambda: f64| -> f64 {
        let mut logs = 0.0;
        let mut inv = 0.0;
        for &i in &supp {
            logs += p_hat[i] * (lambda - v[i]).ln();
            inv += p_hat[i] / (lambda - v[i]);
        }
        logs + inv.ln()
    };
    let q_at = |lambda: f64| -> Vec<f64> {
        let mut inv = 0.0;
        for &i in &supp {
            inv += p_hat[i] / (lambda - v[i]);
        }
        let mut q = vec![0.0; n];
        for &i in &supp {
            q[i] = p_hat[i] / (lambda - v[i]) / inv;
        }
        q
    };

    let const_on_supp = v_in_max - v_in_min <= 1e-12 * v_in_max.abs().max(1.0);

    if let Some(out_idx) = outside.filter(|&i| v[i] > v_in_max) {
        // The best coordinate carries no empirical mass. At the pinned
        // multiplier lambda = v[out_idx] the in-support allocation has a
        // closed form; if its KL already exceeds eps the optimum is interior
        // and bisection below applies, otherwise leftover mass goes outside.
        let w = v[out_idx];
        let kl_w = if const_on_supp { 0.0 } else { kl_at(w) };
        if eps >= kl_w {
            let log_nu: f64 = supp.iter().map(|&i| p_hat[i] * (w - v[i]).ln()).sum::<f64>() - eps;
            let mut q = vec![0.0; n];
            let mut mass_in = 0.0;
            for &i in &supp {
                q[i] = p_hat[i] * (log_nu - (w - v[i]).ln()).exp();
                mass_in += q[i];
            }
            q[out_idx] = (1.0 - mass_in).max(0.0);
            // A radius past ~700 underflows the retained support mass to
            // exact zero; that q is the limit point again, so flag it.
            let saturated = supp.iter().any(|&i| q[i] == 0.0);
            return Ok(KlBallSolution {
                value: dot(&q),
                q,
                dual: w,
                iterations: 0,
                saturated,
            });
        }
        return Ok(bisect_dual(p_hat, v, eps, w, kl_at, q_at, dot));
    }

    if const_on_supp {
        // v is flat wherever q is forced to keep mass and no better coordinate
        // is reachable: p_hat itself is optimal and the constraint is slack.
        return Ok(KlBallSolution {
            value: dot(p_hat),
            q: p_hat.to_vec(),
            dual: v_in_max,
            iterations: 0,
            saturated: true,
        });
    }

    Ok(bisect_dual(p_hat, v, eps, v_in_max, kl_at, q_at, dot))
}

fn bisect_dual(
    _p_hat: &[f64],
    v: &[f64],
    eps: f64,
    lo_edge: f64,
    kl_at: impl Fn(f64) -> f64,
    q_at: impl Fn(f64) -> Vec<f64>,
    dot: impl Fn(&[f64]) -> f64,
) -> KlBallSolution {
    // Mathematically KL -> infinity as the multiplier approaches the edge,
    // but in floats it tops out near p_max * ln(1/ulp). A radius beyond that
    // saturates everything reachable: return the edge iterate, flagged.
    let edge = lo_edge.next_up().max(lo_edge + f64::MIN_POSITIVE);
    if kl_at(edge) <= eps {
        let q = q_at(edge);
        return KlBallSolution {
            value: dot(&q),
            q,
            dual: edge,
            iterations: 0,
            saturated: true,
        };
    }
    let v_max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    // KL(lo_edge+) > eps now holds; expand the upper edge geometrically until
    // the constraint brackets eps.
    let mut lo = lo_edge;
    let mut hi = v_max + (v_max - v_min) + 1.0;
    // Radii produced by beta_p/n are >= ~1e-19, which bounds the multiplier
    // well inside f64 range; the cap is unreachable in practice.
    for _ in 0..200 {
        if kl_at(hi) <= eps {
            break;
        }
        hi = lo + 2.0 * (hi - lo);
    }
    let mut iterations = 0;
    let mut feasible = hi;
    for _ in 0..KL_BISECT_MAX_ITERS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket exhausted at f64 resolution
        }
        let kl = kl_at(mid);
        if kl > eps {
            lo = mid;
        } else {
            hi = mid;
            feasible = mid;
        }
        if (kl - eps).abs() <= KL_BISECT_TOL {
            break;
        }
    }
    let q = q_at(feasible);
    KlBallSolution {
        value: dot(&q),
        q,
        dual: feasible,
        iterations,
        saturated: false,
    }
}

/// Minimize the linear objective over the same ball, as the negated
/// maximization of `-v`.
pub fn kl_min_linear(p_hat: &[f64], v: &[f64], eps: f64) -> Result<KlBallSolution, Error> {
    let neg: Vec<f64> = v.iter().map(|x| -x).collect();
    let mut sol = kl_max_linear(p_hat, &neg, eps)?;
    sol.value = -sol.value;
    Ok(sol)
}

fn validate_distribution(p: &[f64]) -> Result<(), Error> {
    let mut sum = 0.0;
    for &x in p {
        if x < 0.0 || !x.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "entry {x} is negative or non-finite"
            )));
        }
        sum += x;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "p_hat sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{optimal_value_and_policy, sample_episode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn beta_p_reference_values() {
        // t=0, delta=0.1, S=4, A=2, H=8: log(1280) + 3.
        let b = beta_p(0, 0.1, 4, 2, 8).unwrap();
        assert!((b - (1280.0f64.ln() + 3.0)).abs() < 1e-12);
        assert!((b - 10.154615356913663).abs() < 1e-9);
        // S=2, A=1, H=1: log(4/delta) + 1.
        for delta in [0.3, 0.05, 0.004] {
            let b = beta_p(0, delta, 2, 1, 1).unwrap();
            assert!((b - ((4.0 / delta).ln() + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_p_at_zero_is_beta_cnt_plus_s_minus_one() {
        for (s, a, h, delta) in [(4usize, 2usize, 8usize, 0.1), (10, 4, 8, 0.01)] {
            let lhs = beta_p(0, delta, s, a, h).unwrap();
            let rhs = beta_cnt(delta, s, a, h).unwrap() + (s - 1) as f64;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_p_monotone_and_guarded() {
        let b10 = beta_p(10, 0.1, 4, 2, 8).unwrap();
        let b100 = beta_p(100, 0.1, 4, 2, 8).unwrap();
        assert!(b10 < b100);
        let tight = beta_p(5, 0.01, 4, 2, 8).unwrap();
        let loose = beta_p(5, 0.2, 4, 2, 8).unwrap();
        assert!(tight > loose);
        assert!(beta_p(5, 0.1, 4, 2, 8).unwrap() > 0.0);
        assert!(beta_p(0, 0.1, 1, 2, 8).is_err());
        assert!(beta_p(0, 1.0, 4, 2, 8).is_err());
    }

    #[test]
    fn kl_categorical_values() {
        assert_eq!(kl_categorical(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        let kl = kl_categorical(&[1.0, 0.0], &[0.5, 0.5]);
        assert!((kl - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(kl_categorical(&[0.5, 0.5], &[1.0, 0.0]).is_infinite());
        // Zero q mass where p has none is fine.
        assert_eq!(kl_categorical(&[1.0, 0.0], &[1.0, 0.0]), 0.0);
    }

    #[test]
    fn history_single_update_bookkeeping() {
        let mut hist = ExplorationHistory::new(3, 2, 4);
        let traj = Trajectory {
            states: vec![0, 1, 2, 1],
            actions: vec![1, 0, 0, 1],
            total_reward: 0.0,
        };
        hist.update(&traj);
        assert_eq!(hist.episodes(), 1);
        assert_eq!(hist.count(0, 0, 1), 1);
        assert_eq!(hist.count(1, 1, 0), 1);
        assert_eq!(hist.transition_count(0, 0, 1, 1), 1);
        assert_eq!(hist.transition_count(2, 2, 0, 1), 1);
        assert_eq!(hist.initial_count(0), 1);
        assert!(hist.is_consistent());
    }

    #[test]
    fn history_update_order_does_not_matter() {
        let mdp = crate::instances::single_chain(5);
        let (_, pi) = optimal_value_and_policy(&mdp);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trajs: Vec<_> = (0..50).map(|_| sample_episode(&mdp, &pi, &mut rng)).collect();
        let mut fwd = ExplorationHistory::new(4, 2, 5);
        let mut rev = ExplorationHistory::new(4, 2, 5);
        for t in &trajs {
            fwd.update(t);
        }
        for t in trajs.iter().rev() {
            rev.update(t);
        }
        assert_eq!(fwd.counts, rev.counts);
        assert_eq!(fwd.transition_counts, rev.transition_counts);
        assert_eq!(fwd.initial_counts, rev.initial_counts);
    }

    #[test]
    fn history_invariants_under_random_streams() {
        let mdp = crate::instances::double_chain(6);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut hist = ExplorationHistory::new(4, 2, 6);
        for i in 0..300 {
            // Mix of policies so several pairs get visited.
            let pi = crate::mdp::Policy::constant(6, 4, 2, i % 2).unwrap();
            hist.update(&sample_episode(&mdp, &pi, &mut rng));
            assert!(hist.is_consistent());
        }
    }

    #[test]
    fn empirical_kernel_rows() {
        let mut hist = ExplorationHistory::new(4, 1, 2);
        // Pair (h=0, s=0, a=0) visited 4 times with successors {0, 0, 1, 3}.
        for s_next in [0, 0, 1, 3] {
            hist.update(&Trajectory {
                states: vec![0, s_next],
                actions: vec![0, 0],
                total_reward: 0.0,
            });
        }
        let kernel = hist.empirical_kernel();
        assert_eq!(kernel.row(0, 0, 0), &[0.5, 0.25, 0.0, 0.25]);
        // Unvisited pair: uniform.
        assert_eq!(kernel.row(0, 1, 0), &[0.25, 0.25, 0.25, 0.25]);
        // Round-0 row is the initial-state frequency.
        assert_eq!(kernel.initial_row(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empirical_kernel_matches_deterministic_truth() {
        let rewards = vec![0.0; 4];
        let transitions = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let mdp = crate::mdp::TabularMdp::new(2, 2, 1, rewards, transitions, vec![1.0, 0.0]).unwrap();
        let mut hist = ExplorationHistory::new(2, 2, 1);
        let pi = crate::mdp::Policy::constant(1, 2, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            hist.update(&sample_episode(&mdp, &pi, &mut rng));
        }
        assert_eq!(hist.count(0, 0, 0), 100);
        assert_eq!(hist.initial_count(0), 100);
        // One round only: the visited pair's successors are never recorded,
        // so its row falls back to uniform like the terminal-round rows do.
        assert_eq!(hist.empirical_kernel().initial_row(), &[1.0, 0.0]);
    }

    #[test]
    fn empirical_row_reaches_point_mass_on_deterministic_kernel() {
        let rewards = vec![0.0; 2 * 2];
        let transitions = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let mdp = crate::mdp::TabularMdp::new(2, 1, 2, rewards, transitions, vec![1.0, 0.0]).unwrap();
        let mut hist = ExplorationHistory::new(2, 1, 2);
        let pi = crate::mdp::Policy::constant(2, 2, 1, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..25 {
            hist.update(&sample_episode(&mdp, &pi, &mut rng));
        }
        // n >= 1 visits on a point-mass kernel reproduce the truth exactly.
        assert_eq!(hist.empirical_kernel().row(0, 0, 0), mdp.transition_row(0, 0, 0));
    }

    #[test]
    fn kl_max_constant_objective() {
        for c in [0.0, 0.4, -2.5] {
            let sol = kl_max_linear(&[0.2, 0.3, 0.5], &[c, c, c], 0.7).unwrap();
            assert!((sol.value - c).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_max_zero_radius_returns_p_dot_v() {
        let p = [0.25, 0.25, 0.5];
        let v = [1.0, -0.5, 0.25];
        let sol = kl_max_linear(&p, &v, 0.0).unwrap();
        let expect = 0.25 - 0.125 + 0.125;
        assert!((sol.value - expect).abs() < 1e-12);
        assert_eq!(sol.q, p.to_vec());
    }

    #[test]
    fn kl_max_reference_point() {
        // Grid oracle at resolution 1e-6 gives 0.599008 for this triple.
        let sol = kl_max_linear(&[0.5, 0.5], &[0.0, 1.0], 0.02).unwrap();
        assert!((sol.value - 0.599008).abs() < 1e-5);
        assert!(kl_categorical(&[0.5, 0.5], &sol.q) <= 0.02 + 1e-8);
        let qsum: f64 = sol.q.iter().sum();
        assert!((qsum - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kl_min_is_negated_max() {
        let p = [0.5, 0.5];
        let v = [0.0, 1.0];
        let min = kl_min_linear(&p, &v, 0.02).unwrap();
        let neg = kl_max_linear(&p, &[0.0, -1.0], 0.02).unwrap();
        assert_eq!(min.value, -neg.value);
        let max = kl_max_linear(&p, &v, 0.02).unwrap();
        // Symmetric ball around a symmetric p: min mirrors max about p.v.
        assert!((min.value - (1.0 - max.value)).abs() < 1e-9);
        // Degenerate cases mirror the maximizer's.
        let flat = kl_min_linear(&[0.2, 0.8], &[0.7, 0.7], 0.5).unwrap();
        assert!((flat.value - 0.7).abs() < 1e-12);
        let pinned = kl_min_linear(&p, &v, 0.0).unwrap();
        assert!((pinned.value - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_max_monotone_in_radius_and_above_plugin() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..200 {
            let n = 2 + (rng.gen::<u64>() % 3) as usize;
            let mut p: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            if rng.gen::<f64>() < 0.3 {
                p[rng.gen_range(0..n)] = 0.0;
            }
            let tot: f64 = p.iter().sum();
            for x in &mut p {
                *x /= tot;
            }
            let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let e1 = rng.gen::<f64>() * 0.5;
            let e2 = e1 + rng.gen::<f64>() * 0.5;
            let plugin: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum();
            let s1 = kl_max_linear(&p, &v, e1).unwrap();
            let s2 = kl_max_linear(&p, &v, e2).unwrap();
            assert!(s1.value >= plugin - 1e-9);
            assert!(s2.value >= s1.value - 1e-9);
            assert!(kl_categorical(&p, &s1.q) <= e1 + 1e-8);
            assert!(kl_categorical(&p, &s2.q) <= e2 + 1e-8);
        }
    }

    #[test]
    fn kl_max_absorbing_argmax_reaches_max_v() {
        // argmax of v has zero empirical mass, so a large radius drains
        // essentially everything onto it.
        let p = [0.6, 0.4, 0.0];
        let v = [0.1, 0.3, 0.9];
        let sol = kl_max_linear(&p, &v, 50.0).unwrap();
        assert!((sol.value - 0.9).abs() < 1e-8);
        assert!(!sol.saturated);
        // Infinite radius returns the limit point exactly.
        let sol = kl_max_linear(&p, &v, f64::INFINITY).unwrap();
        assert_eq!(sol.value, 0.9);
        assert!(sol.saturated);
        assert_eq!(sol.q, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn kl_max_saturates_past_f64_reachable_radius() {
        // The argmax sits inside the support: KL can grow without bound in
        // exact arithmetic but tops out near (1 - p_argmax) ln(1/ulp) in
        // floats (~30 here). A radius beyond that must return the edge
        // iterate, not NaN.
        let sol = kl_max_linear(&[0.9, 0.1], &[0.0, 1.0], 40.0).unwrap();
        assert!(sol.value.is_finite());
        assert!(sol.saturated);
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert!(kl_categorical(&[0.9, 0.1], &sol.q) <= 40.0 + 1e-8);
        // Just below the ceiling the bracket collapses but stays feasible.
        let sol = kl_max_linear(&[0.9, 0.1], &[0.0, 1.0], 30.0).unwrap();
        assert!(sol.value.is_finite());
        assert!((sol.value - 1.0).abs() < 1e-9);
        assert!(kl_categorical(&[0.9, 0.1], &sol.q) <= 30.0 + 1e-8);
        // Well below the float ceiling the same call still bisects normally.
        let sol = kl_max_linear(&[0.9, 0.1], &[0.0, 1.0], 2.0).unwrap();
        assert!(!sol.saturated);
        assert!((kl_categorical(&[0.9, 0.1], &sol.q) - 2.0).abs() < 1e-6);
    }

    #[test]
    fn kl_max_saturates_when_nothing_improves() {
        // v flat on the support, best coordinate already held: constraint slack.
        let sol = kl_max_linear(&[0.5, 0.5, 0.0], &[0.8, 0.8, 0.2], 3.0).unwrap();
        assert!((sol.value - 0.8).abs() < 1e-12);
        assert!(sol.saturated);
    }

    #[test]
    fn kl_max_rejects_bad_inputs() {
        assert!(kl_max_linear(&[0.5, 0.5], &[0.0, 1.0], -1e-9).is_err());
        assert!(kl_max_linear(&[0.5, 0.5], &[0.0, f64::NAN], 0.1).is_err());
        assert!(kl_max_linear(&[0.7, 0.7], &[0.0, 1.0], 0.1).is_err());
        assert!(kl_max_linear(&[0.5, 0.5], &[1.0], 0.1).is_err());
    }

    /// Dense scan over the 1-simplex; independent of the dual solver.
    fn grid_max_s2(p: &[f64], v: &[f64], eps: f64, res: f64) -> f64 {
        let steps = (1.0 / res).round() as usize;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            let q0 = i as f64 * res;
            let q = [q0, 1.0 - q0];
            if kl_categorical(p, &q) <= eps {
                best = best.max(q[0] * v[0] + q[1] * v[1]);
            }
        }
        best
    }

    #[test]
    fn kl_max_matches_fine_grid_s2() {
        let cases: [(&[f64], &[f64], f64); 4] = [
            (&[0.5, 0.5], &[0.0, 1.0], 0.02),
            (&[0.9, 0.1], &[0.2, 0.7], 0.15),
            (&[1.0, 0.0], &[0.0, 1.0], 0.05),
            (&[0.3, 0.7], &[1.0, 0.0], 0.4),
        ];
        for (p, v, eps) in cases {
            let sol = kl_max_linear(p, v, eps).unwrap();
            let grid = grid_max_s2(p, v, eps, 1e-6);
            assert!(
                (sol.value - grid).abs() < 1e-5,
                "solver {} vs grid {} for p={p:?} v={v:?} eps={eps}",
                sol.value,
                grid
            );
        }
    }
}
