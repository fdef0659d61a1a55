//! Agents: model-input assembly, per-slot action selection, recurrent state
//! handling, and parameter refresh from the optimizer.
//!
//! The per-slot seed contract: an agent's action sequence for slot `s`
//! depends only on `(master_seed, realm, s, params, observations)` — never
//! on batch composition or worker assignment. Samplers rely on this for
//! cross-mode equivalence.

mod dqn;
mod eps;
mod leading;
mod pg;
mod qpg;
mod recurrent;
mod slot_rng;

pub use dqn::DqnAgent;
pub use eps::{argmax, epsilon_greedy, EpsilonSpec};
pub use leading::{infer_leading_dims, restore_leading_dims, LeadDims};
pub use pg::PgAgent;
pub use qpg::QpgAgent;
pub use recurrent::RecurrentQAgent;
pub use slot_rng::{derive_stream, Realm, SlotStreams, StreamDomain};

use crate::env::{Action, Space};
use crate::error::Result;
use crate::nn::ParamSet;
use crate::sarray::StructSpec;

/// Model inputs for one slot: the current observation plus the previous
/// step's action (encoded) and reward, both zero right after a reset.
pub struct SlotInputs<'a> {
    pub obs: &'a [f32],
    pub prev_action: &'a [f32],
    pub prev_reward: f32,
}

/// One slot's action and agent diagnostics (per agent_info leaf, in spec
/// order). Recurrent agents record their pre-step state here.
pub struct AgentSlotStep {
    pub action: Action,
    pub info: Vec<Vec<f32>>,
}

/// Fixed-width model encoding of an action: one-hot for discrete spaces,
/// the raw vector for continuous ones. The same function serves sampling
/// and training so replayed inputs match recorded ones exactly.
pub fn encode_action(space: &Space, action: &Action, out: &mut [f32]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    match (space, action) {
        (Space::Discrete { n }, Action::Discrete(a)) => {
            debug_assert_eq!(out.len(), *n);
            if *a >= 0 && (*a as usize) < *n {
                out[*a as usize] = 1.0;
            }
        }
        (Space::Box { .. }, Action::Continuous(v)) => {
            out.copy_from_slice(v);
        }
        _ => panic!("action does not match space"),
    }
}

pub fn action_enc_dim(space: &Space) -> usize {
    match space {
        Space::Discrete { n } => *n,
        Space::Box { low, .. } => low.len(),
        Space::Composite { .. } => space.flat_dim(),
    }
}

/// Chooses control actions during sampling; trained by an algorithm through
/// published parameter versions, picked up only at batch boundaries.
pub trait Agent: Send {
    fn agent_info_spec(&self) -> StructSpec;

    /// Batched action selection over a subset of slots. Per-slot results
    /// depend only on that slot's inputs and rng stream.
    fn act(&mut self, slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<AgentSlotStep>>;

    /// Zero the slot's recurrent state; prev-action/reward alignment is
    /// owned by the collector.
    fn reset_slot(&mut self, slot: usize);

    /// Adopt newly published parameters; called only at batch boundaries.
    /// `cum_env_steps` drives exploration schedules.
    fn refresh(&mut self, version: u64, params: &ParamSet, cum_env_steps: usize);

    fn version(&self) -> u64;

    fn set_eval(&mut self, eval: bool);

    /// Copy for a decentralized worker (same realm, fresh lazily derived
    /// slot streams, zero recurrent state).
    fn fork(&self) -> Box<dyn Agent>;

    /// Copy for offline evaluation: separate realm so training streams are
    /// untouched, eval mode enabled.
    fn fork_eval(&self) -> Box<dyn Agent>;

    /// Whether the sampler should ask for bootstrap values at batch ends.
    fn wants_bootstrap(&self) -> bool {
        false
    }

    /// State-value estimates for the given inputs (no rng draws).
    fn state_values(&mut self, _slots: &[usize], _inputs: &[SlotInputs<'_>]) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

pub(crate) fn obs_matrix(inputs: &[SlotInputs<'_>]) -> crate::nn::Tensor {
    let k = inputs.len();
    let dim = inputs.first().map(|i| i.obs.len()).unwrap_or(0);
    let mut data = Vec::with_capacity(k * dim);
    for inp in inputs {
        data.extend(inp.obs.iter().map(|&v| v as f64));
    }
    crate::nn::Tensor::from_vec(&[k, dim], data)
}
