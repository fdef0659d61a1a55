//! Offline evaluation: separate env instances and rng realm, so training
//! slot streams are untouched.

use super::collector::SlotState;
use crate::agent::{Agent, Realm, SlotInputs};
use crate::env::EnvFactory;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_return: f64,
    pub min_return: f64,
    pub max_return: f64,
    pub mean_length: f64,
}

impl EvalSummary {
    fn from_records(records: &[crate::env::TrajInfo]) -> EvalSummary {
        let n = records.len().max(1) as f64;
        EvalSummary {
            episodes: records.len(),
            mean_return: records.iter().map(|r| r.return_).sum::<f64>() / n,
            min_return: records.iter().map(|r| r.return_).fold(f64::INFINITY, f64::min),
            max_return: records.iter().map(|r| r.return_).fold(f64::NEG_INFINITY, f64::max),
            mean_length: records.iter().map(|r| r.length as f64).sum::<f64>() / n,
        }
    }
}

/// Run one evaluation episode per slot (up to `eval_max_steps` rows), with
/// a forked eval agent. Episodes cut off by still running at the cap are
/// recorded as-is.
pub fn evaluate(
    agent: &dyn Agent,
    env_factory: &EnvFactory,
    eval_envs: usize,
    eval_max_steps: usize,
    discount: f64,
    master_seed: u64,
    train_realm: Realm,
) -> Result<EvalSummary> {
    let eval_realm = match train_realm {
        Realm::Train { learner } => Realm::Eval { learner },
        eval => eval,
    };
    let mut eval_agent = agent.fork_eval();
    let mut states: Vec<SlotState> = (0..eval_envs)
        .map(|slot| SlotState::new(slot, env_factory(slot), master_seed, eval_realm, discount))
        .collect();
    let mut active: Vec<bool> = vec![true; eval_envs];
    let mut records = Vec::with_capacity(eval_envs);
    for _t in 0..eval_max_steps {
        let idx: Vec<usize> = (0..eval_envs).filter(|&i| active[i]).collect();
        if idx.is_empty() {
            break;
        }
        let slots: Vec<usize> = idx.clone();
        let inputs: Vec<SlotInputs> = idx.iter().map(|&i| states[i].inputs()).collect();
        let steps = eval_agent.act(&slots, &inputs)?;
        for (k, agent_step) in steps.into_iter().enumerate() {
            let i = idx[k];
            let (env_step, reset_obs) = states[i].step_env(&agent_step.action, _t)?;
            if let Some(record) = states[i].advance(agent_step.action, &env_step, reset_obs) {
                records.push(record);
                active[i] = false;
            }
        }
    }
    // still-running episodes at the cap: record the truncated trajectory
    for (i, state) in states.iter().enumerate() {
        if active[i] && state.traj.length > 0 {
            records.push(state.traj.complete());
        }
    }
    Ok(EvalSummary::from_records(&records))
}
