//! Brute-force verification suite: every check pits a fast implementation
//! against an independent oracle (dense grid search, exhaustive policy
//! enumeration, closed forms, Monte Carlo), at desk scale.

use crate::confidence::{kl_categorical, kl_max_linear};
use crate::error::Error;
use crate::instances;
use crate::mdp::{evaluate_policy, optimal_value_and_policy, sample_episode, Policy, TabularMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Run the oracle battery, optionally keeping only checks whose name
/// contains `filter`.
pub fn verify_suite(filter: Option<&str>) -> Vec<CheckResult> {
    let checks: Vec<(&'static str, fn() -> CheckResult)> = vec![
        ("kl-grid", check_kl_grid),
        ("dp-exhaustive", check_dp_exhaustive),
        ("uniform-identity", check_uniform_identity),
        ("tree-identity", check_tree_identity),
        ("mc-vs-dp", check_mc_vs_dp),
        ("permutation", check_permutation),
    ];
    checks
        .into_iter()
        .filter(|(name, _)| filter.is_none_or(|f| name.contains(f)))
        .map(|(_, run)| run())
        .collect()
}

/// Brute-force search over the simplex, independent of the dual solver: a
/// grid scan at `resolution` sharpened with exact feasible-interval
/// endpoints.
///
/// The KL ball is convex, so each 1-D slice of it is an interval whose
/// endpoints bisection on `kl_categorical` pins to ~1e-12, and a linear
/// objective on a slice peaks at an endpoint. For S=2 that already solves
/// the problem. For S=3 the slice-maximum as a function of the remaining
/// coordinate is concave (partial maximization of a linear function over a
/// convex set), so the best grid slice lies within one cell of the true
/// argmax and a zooming window around it converges. A flat grid alone is
/// only first-order accurate at interval endpoints, far too coarse at 1e-3.
pub fn grid_max_linear(p_hat: &[f64], v: &[f64], eps: f64, resolution: f64) -> f64 {
    match p_hat.len() {
        2 => slice_max_2(p_hat, v, eps),
        3 => {
            let g = |q0: f64| slice_max_3(p_hat, v, eps, q0);
            let steps = (1.0 / resolution).round() as usize;
            let mut best = f64::NEG_INFINITY;
            let mut at = 0.0;
            for i in 0..=steps {
                let q0 = i as f64 * resolution;
                let val = g(q0);
                if val > best {
                    best = val;
                    at = q0;
                }
            }
            let mut step = resolution;
            while step > 1e-7 {
                let next = step / 10.0;
                let lo = (at - 2.0 * step).max(0.0);
                let hi = (at + 2.0 * step).min(1.0);
                let n = ((hi - lo) / next).round() as usize;
                for i in 0..=n {
                    let q0 = lo + i as f64 * next;
                    let val = g(q0);
                    if val > best {
                        best = val;
                        at = q0;
                    }
                }
                step = next;
            }
            best
        }
        n => panic!("grid oracle supports S in {{2, 3}}, got {n}"),
    }
}

/// Exact maximum over the 1-simplex: the feasible set is one interval in q0
/// and the objective is linear, so only the interval endpoints matter.
fn slice_max_2(p: &[f64], v: &[f64], eps: f64) -> f64 {
    let kl_of = |q0: f64| kl_categorical(p, &[q0, 1.0 - q0]);
    let Some((lo, hi)) = feasible_interval(&kl_of, eps, 0.0, 1.0) else {
        return f64::NEG_INFINITY;
    };
    let obj = |q0: f64| q0 * v[0] + (1.0 - q0) * v[1];
    obj(lo).max(obj(hi))
}

/// Maximum over the slice q = (q0, q1, 1 - q0 - q1) at fixed q0.
fn slice_max_3(p: &[f64], v: &[f64], eps: f64, q0: f64) -> f64 {
    let q1_max = 1.0 - q0;
    if q1_max < 0.0 {
        return f64::NEG_INFINITY;
    }
    let kl_of = |q1: f64| kl_categorical(p, &[q0, q1, (q1_max - q1).max(0.0)]);
    let Some((lo, hi)) = feasible_interval(&kl_of, eps, 0.0, q1_max) else {
        return f64::NEG_INFINITY;
    };
    let obj = |q1: f64| q0 * v[0] + q1 * v[1] + (q1_max - q1) * v[2];
    obj(lo).max(obj(hi))
}

/// Endpoints of `{x in [lo, hi] : f(x) <= eps}` for convex `f`, or None when
/// the set is empty. Golden-section locates the minimizer, bisection the
/// crossings.
fn feasible_interval(f: &impl Fn(f64) -> f64, eps: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..120 {
        let d = INV_PHI * (b - a);
        let x1 = b - d;
        let x2 = a + d;
        if f(x1) <= f(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let x_min = 0.5 * (a + b);
    let f_min = f(x_min);
    if f_min.is_nan() || f_min > eps {
        return None;
    }
    let cross = |mut inside: f64, mut outside: f64| -> f64 {
        if f(outside) <= eps {
            return outside;
        }
        for _ in 0..100 {
            let mid = 0.5 * (inside + outside);
            if f(mid) <= eps {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    Some((cross(x_min, lo), cross(x_min, hi)))
}

/// Draw one random (p_hat, v, eps) triple, with occasional zero-mass
/// coordinates so the absorbing branch of the solver gets exercised.
pub fn random_kl_triple(rng: &mut ChaCha8Rng, num_states: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let mut p: Vec<f64> = (0..num_states).map(|_| 0.02 + rng.gen::<f64>()).collect();
    if rng.gen::<f64>() < 0.3 {
        let dead = rng.gen_range(0..num_states);
        p[dead] = 0.0;
    }
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    let v: Vec<f64> = (0..num_states).map(|_| rng.gen::<f64>()).collect();
    let eps = 0.01 + 0.6 * rng.gen::<f64>();
    (p, v, eps)
}

/// Run the solver-vs-grid comparison for an arbitrary solver value function;
/// parameterized so the suite's sensitivity is itself testable.
pub fn kl_grid_discrepancy(
    solver: impl Fn(&[f64], &[f64], f64) -> f64,
    triples: usize,
    resolution: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b6c_6772_6964);
    let mut worst: f64 = 0.0;
    for i in 0..triples {
        let s = if i % 2 == 0 { 2 } else { 3 };
        let (p, v, eps) = random_kl_triple(&mut rng, s);
        let got = solver(&p, &v, eps);
        let want = grid_max_linear(&p, &v, eps, resolution);
        worst = worst.max((got - want).abs());
    }
    worst
}

fn check_kl_grid() -> CheckResult {
    let worst = kl_grid_discrepancy(
        |p, v, eps| kl_max_linear(p, v, eps).expect("valid triple").value,
        200,
        1e-3,
    );
    CheckResult {
        name: "kl-grid",
        passed: worst <= 1e-4,
        detail: format!("worst |solver - grid| = {worst:.2e} over 200 triples (S in {{2,3}})"),
    }
}

/// Enumerate all A^(S*H) deterministic policies.
pub fn exhaustive_optimal_value(mdp: &TabularMdp) -> Result<f64, Error> {
    let slots = mdp.horizon() * mdp.num_states();
    let a = mdp.num_actions();
    let total = (a as u64).pow(slots as u32);
    assert!(total <= 1 << 20, "policy space too large to enumerate");
    let mut best = f64::NEG_INFINITY;
    for code in 0..total {
        let mut c = code;
        let actions: Vec<usize> = (0..slots)
            .map(|_| {
                let x = (c % a as u64) as usize;
                c /= a as u64;
                x
            })
            .collect();
        let pi = Policy::new(mdp.horizon(), mdp.num_states(), a, actions)?;
        best = best.max(evaluate_policy(mdp, &pi)?);
    }
    Ok(best)
}

fn random_small_mdp(rng: &mut ChaCha8Rng, s: usize, a: usize, h: usize) -> TabularMdp {
    let rewards: Vec<f64> = (0..h * s * a).map(|_| rng.gen::<f64>()).collect();
    let mut transitions = Vec::with_capacity(h * s * a * s);
    for _ in 0..h * s * a {
        let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        transitions.extend(raw.iter().map(|x| x / total));
    }
    let raw: Vec<f64> = (0..s).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let initial: Vec<f64> = raw.iter().map(|x| x / total).collect();
    TabularMdp::new(s, a, h, rewards, transitions, initial).expect("normalized rows")
}

fn check_dp_exhaustive() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6470);
    let mut worst: f64 = 0.0;
    // A^(S*H) <= 1024 in every shape tried.
    for &(s, a, h) in &[(2usize, 2usize, 2usize), (2, 2, 4), (3, 2, 3), (2, 4, 2), (5, 2, 2)] {
        for _ in 0..4 {
            let mdp = random_small_mdp(&mut rng, s, a, h);
            let (fast, pi) = optimal_value_and_policy(&mdp);
            let brute = exhaustive_optimal_value(&mdp).expect("enumeration");
            worst = worst.max((fast - brute).abs());
            let attained = evaluate_policy(&mdp, &pi).expect("own policy");
            worst = worst.max((fast - attained).abs());
        }
    }
    CheckResult {
        name: "dp-exhaustive",
        passed: worst <= 1e-9,
        detail: format!("worst |DP - exhaustive| = {worst:.2e} over 20 random small MDPs"),
    }
}

fn check_uniform_identity() -> CheckResult {
    let mut combos = 0;
    let mut worst: f64 = 0.0;
    for s in [3, 4, 6, 9, 10] {
        for a in [2, 5] {
            for (h, r, eps) in [(2, 0.3, 0.1), (8, 0.4, 0.05)] {
                let m = instances::uniform_instance(s, a, h, r, eps).expect("valid params");
                let (v, _) = optimal_value_and_policy(&m);
                worst = worst.max((v - h as f64 * (r + eps) / 2.0).abs());
                combos += 1;
            }
        }
    }
    CheckResult {
        name: "uniform-identity",
        passed: combos >= 20 && worst <= 1e-10,
        detail: format!("worst |V* - H(r+eps)/2| = {worst:.2e} over {combos} combinations"),
    }
}

fn check_tree_identity() -> CheckResult {
    let mut combos = 0;
    let mut worst: f64 = 0.0;
    for s in [3usize, 5, 9, 17] {
        let n = (s - 1).trailing_zeros() as usize;
        for a in [3, 4] {
            for h_extra in [0, 2, 5] {
                let h = 6 * n + 1 + h_extra;
                for r in [0.4, 0.55] {
                    let m = instances::tree_instance(s, a, h, r).expect("valid params");
                    let (v, _) = optimal_value_and_policy(&m);
                    worst = worst.max((v - (h as f64 - 1.0) * r).abs());
                    combos += 1;
                }
            }
        }
    }
    CheckResult {
        name: "tree-identity",
        passed: combos >= 20 && worst <= 1e-10,
        detail: format!("worst |V* - (H-1)r| = {worst:.2e} over {combos} combinations"),
    }
}

/// Monte-Carlo mean of episode totals vs the exact DP value, judged at three
/// standard errors.
pub fn mc_vs_dp_gap(mdp: &TabularMdp, policy: &Policy, episodes: usize, seed: u64) -> (f64, f64) {
    let exact = evaluate_policy(mdp, policy).expect("matching policy");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..episodes {
        let x = sample_episode(mdp, policy, &mut rng).total_reward;
        sum += x;
        sumsq += x * x;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    let stderr = (var / n).sqrt();
    ((mean - exact).abs(), stderr)
}

fn check_mc_vs_dp() -> CheckResult {
    let mdp = instances::single_chain(8);
    let (_, pi) = optimal_value_and_policy(&mdp);
    let mut detail = String::new();
    let mut passed = true;
    for seed in [1u64, 2, 3] {
        let (gap, stderr) = mc_vs_dp_gap(&mdp, &pi, 100_000, seed);
        passed &= gap <= 3.0 * stderr;
        detail.push_str(&format!("seed {seed}: |gap| = {gap:.4} vs 3 SE = {:.4}; ", 3.0 * stderr));
    }
    CheckResult {
        name: "mc-vs-dp",
        passed,
        detail,
    }
}

fn check_permutation() -> CheckResult {
    let m = instances::uniform_instance(4, 2, 2, 0.3, 0.2).expect("valid params");
    let sigma = instances::PermutationSet::uniform(4, 2, 2, &[1, 0]).expect("bijection");
    let permuted = instances::permute_instance(&m, &sigma).expect("matching dims");
    let mut worst: f64 = 0.0;
    for mask in 0..(1u32 << 8) {
        let actions: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
        let pi = Policy::new(2, 4, 2, actions).expect("valid actions");
        let composed = instances::permute_policy(&pi, &sigma).expect("matching dims");
        let v = evaluate_policy(&m, &pi).expect("eval");
        let vp = evaluate_policy(&permuted, &composed).expect("eval");
        worst = worst.max((v - vp).abs());
    }
    CheckResult {
        name: "permutation",
        passed: worst <= 1e-12,
        detail: format!("worst value drift under relabeling = {worst:.2e} over 256 policies"),
    }
}
