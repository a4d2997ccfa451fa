//! Oracle-epsilon BPI-UCRL comparator: the same optimistic sampling loop as
//! the exploration oracle, at one fixed tolerance, stopped when the envelope
//! width `v_bar_root - v_under_root` drops to epsilon. The cited framework
//! does not restate its stopping threshold; this width-based rule is the
//! reconstruction recorded in the crate docs, sharing `plan_optimistic`
//! verbatim with BEE-GPI.

use crate::algo::Environment;
use crate::confidence::ExplorationHistory;
use crate::error::Error;
use crate::mdp::Policy;
use crate::planner::plan_optimistic;
use rand::RngCore;

#[derive(Debug, Clone, PartialEq)]
pub enum BpiVerdict {
    Policy(Policy),
    /// Episode cap hit before the width target; a diagnostic, not a verdict.
    Aborted,
}

impl BpiVerdict {
    pub fn label(&self) -> &'static str {
        match self {
            BpiVerdict::Policy(_) => "policy",
            BpiVerdict::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpiOutcome {
    pub verdict: BpiVerdict,
    pub tau: u64,
    pub final_v_bar_root: f64,
    pub final_v_under_root: f64,
}

/// Run BPI-UCRL with accuracy `epsilon` at tolerance `delta`, sampling
/// greedily on the optimistic Q until the confidence width closes.
pub fn run_bpi_ucrl(
    env: &dyn Environment,
    epsilon: f64,
    delta: f64,
    rng: &mut dyn RngCore,
    episode_cap: u64,
) -> Result<BpiOutcome, Error> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let mut history = ExplorationHistory::new(env.num_states(), env.num_actions(), env.horizon());
    loop {
        let plan = plan_optimistic(&history, &env.known(), delta)?;
        if plan.v_bar_root - plan.v_under_root <= epsilon {
            return Ok(BpiOutcome {
                verdict: BpiVerdict::Policy(plan.pi_bar),
                tau: history.episodes(),
                final_v_bar_root: plan.v_bar_root,
                final_v_under_root: plan.v_under_root,
            });
        }
        if history.episodes() >= episode_cap {
            return Ok(BpiOutcome {
                verdict: BpiVerdict::Aborted,
                tau: history.episodes(),
                final_v_bar_root: plan.v_bar_root,
                final_v_under_root: plan.v_under_root,
            });
        }
        let traj = env.sample(&plan.pi_bar, rng);
        history.update(&traj);
    }
}
