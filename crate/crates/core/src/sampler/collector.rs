//! Shared per-slot collection machinery used by every sampling topology.
//!
//! A collector owns a set of environment slots (env instance, per-slot env
//! rng stream, current observation, prev-action/reward alignment) and
//! writes completed rows into a `[T, B]` sample batch. Whichever topology
//! drives it, the per-slot computations are identical, which is what makes
//! the modes produce bit-identical batches.

use super::batch::BatchLeaves;
use crate::agent::{action_enc_dim, derive_stream, encode_action, Agent, Realm, SlotInputs, StreamDomain};
use crate::env::{Action, Env, EnvStep, Space, TrajInfo};
use crate::error::{Error, Result};
use crate::sarray::StructArray;
use rand_chacha::ChaCha8Rng;

pub struct SlotState {
    pub slot: usize,
    pub env: Box<dyn Env>,
    pub env_rng: ChaCha8Rng,
    pub obs: Vec<f32>,
    pub prev_action: Action,
    pub prev_action_enc: Vec<f32>,
    pub prev_reward: f32,
    pub traj: TrajInfo,
    action_space: Space,
}

impl SlotState {
    pub fn new(
        slot: usize,
        mut env: Box<dyn Env>,
        master_seed: u64,
        realm: Realm,
        discount: f64,
    ) -> Self {
        let mut env_rng = derive_stream(master_seed, realm, StreamDomain::EnvDynamics, slot);
        let obs = env.reset(&mut env_rng);
        let action_space = env.action_space();
        let enc_dim = action_enc_dim(&action_space);
        let zero_action = zero_action(&action_space);
        let mut prev_action_enc = vec![0.0; enc_dim];
        encode_action(&action_space, &zero_action, &mut prev_action_enc);
        SlotState {
            slot,
            env,
            env_rng,
            obs,
            prev_action: zero_action,
            prev_action_enc,
            prev_reward: 0.0,
            traj: TrajInfo::new(discount),
            action_space,
        }
    }

    pub fn inputs(&self) -> SlotInputs<'_> {
        SlotInputs {
            obs: &self.obs,
            prev_action: &self.prev_action_enc,
            prev_reward: self.prev_reward,
        }
    }

    /// Step the env, returning the step and (on done) the fresh reset
    /// observation. The env resets immediately so the next row begins a new
    /// episode.
    pub fn step_env(&mut self, action: &Action, t: usize) -> Result<(EnvStep, Option<Vec<f32>>)> {
        let step = self
            .env
            .step(action, &mut self.env_rng)
            .map_err(|e| Error::EnvStep { t, b: self.slot, msg: e.to_string() })?;
        let reset_obs = if step.done {
            Some(self.env.reset(&mut self.env_rng))
        } else {
            None
        };
        Ok((step, reset_obs))
    }

    /// Advance alignment fields after the step result is known.
    /// Returns the completed trajectory record when the episode ended.
    pub fn advance(
        &mut self,
        action: Action,
        step: &EnvStep,
        reset_obs: Option<Vec<f32>>,
    ) -> Option<TrajInfo> {
        self.traj.update(step);
        if step.done {
            let record = self.traj.complete();
            self.traj = TrajInfo::new(record_discount(&record));
            self.obs = reset_obs.expect("reset observation accompanies done");
            self.prev_action = zero_action(&self.action_space);
            encode_action(&self.action_space, &self.prev_action, &mut self.prev_action_enc);
            self.prev_reward = 0.0;
            Some(record)
        } else {
            self.obs = step.observation.clone();
            encode_action(&self.action_space, &action, &mut self.prev_action_enc);
            self.prev_action = action;
            self.prev_reward = step.reward;
            None
        }
    }
}

fn record_discount(traj: &TrajInfo) -> f64 {
    // TrajInfo keeps its discount private; recover through a fresh record
    // with the same configured discount
    traj.discount()
}

pub fn zero_action(space: &Space) -> Action {
    match space {
        Space::Discrete { .. } => Action::Discrete(0),
        Space::Box { low, .. } => Action::Continuous(vec![0.0; low.len()]),
        Space::Composite { .. } => panic!("composite action spaces are not supported by collectors"),
    }
}

/// Write the pre-step fields of row `(t, b)`: observation, prev alignment
/// columns, then the chosen action and agent info.
#[allow(clippy::too_many_arguments)]
pub fn write_pre_step(
    arr: &mut StructArray,
    leaves: &BatchLeaves,
    t: usize,
    b: usize,
    batch_b: usize,
    obs: &[f32],
    prev_action: &Action,
    prev_reward: f32,
    action: &Action,
    agent_info: &[Vec<f32>],
) {
    let cell = t * batch_b + b;
    arr.set_cell_f32(leaves.observation, cell, obs);
    match prev_action {
        Action::Discrete(a) => arr.set_i64(leaves.prev_action, cell, *a),
        Action::Continuous(v) => arr.set_cell_f32(leaves.prev_action, cell, v),
    }
    arr.set_f32(leaves.prev_reward, cell, prev_reward);
    match action {
        Action::Discrete(a) => arr.set_i64(leaves.action, cell, *a),
        Action::Continuous(v) => arr.set_cell_f32(leaves.action, cell, v),
    }
    for (leaf, values) in leaves.agent_info.iter().zip(agent_info) {
        arr.set_cell_f32(*leaf, cell, values);
    }
}

/// Write the post-step fields of row `(t, b)`: reward, done, env_info.
pub fn write_post_step(
    arr: &mut StructArray,
    leaves: &BatchLeaves,
    t: usize,
    b: usize,
    batch_b: usize,
    step: &EnvStep,
) {
    let cell = t * batch_b + b;
    arr.set_f32(leaves.reward, cell, step.reward);
    arr.set_bool(leaves.done, cell, step.done);
    for (leaf, value) in leaves.env_info.iter().zip(&step.info.0) {
        match value {
            crate::env::InfoValue::F32(v) => arr.set_f32(*leaf, cell, *v),
            crate::env::InfoValue::I64(v) => arr.set_i64(*leaf, cell, *v),
            crate::env::InfoValue::Bool(v) => arr.set_bool(*leaf, cell, *v),
        }
    }
}

/// One full row loop for a contiguous group of slots driven by a local
/// agent (serial mode and decentralized workers).
#[allow(clippy::too_many_arguments)]
pub fn collect_rows_local(
    agent: &mut dyn Agent,
    states: &mut [SlotState],
    arr: &mut StructArray,
    leaves: &BatchLeaves,
    batch_t: usize,
    batch_b: usize,
    traj_out: &mut Vec<TrajInfo>,
) -> Result<()> {
    let slots: Vec<usize> = states.iter().map(|s| s.slot).collect();
    for t in 0..batch_t {
        let inputs: Vec<SlotInputs> = states.iter().map(|s| s.inputs()).collect();
        let steps = agent.act(&slots, &inputs)?;
        for (i, agent_step) in steps.into_iter().enumerate() {
            let state = &mut states[i];
            write_pre_step(
                arr,
                leaves,
                t,
                state.slot,
                batch_b,
                &state.obs,
                &state.prev_action,
                state.prev_reward,
                &agent_step.action,
                &agent_step.info,
            );
            let (env_step, reset_obs) = state.step_env(&agent_step.action, t)?;
            write_post_step(arr, leaves, t, state.slot, batch_b, &env_step);
            let done = env_step.done;
            if let Some(record) = state.advance(agent_step.action, &env_step, reset_obs) {
                traj_out.push(record);
            }
            if done {
                agent.reset_slot(state.slot);
            }
        }
    }
    Ok(())
}
