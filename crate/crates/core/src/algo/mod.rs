//! Loss construction and optimization steps for the three algorithm
//! families: value learning (DQN + variants), policy gradients (A2C, PPO),
//! and Q-value policy gradients (DDPG, TD3).
//!
//! Algorithms are driven in three phases so the runner can interpose
//! gradient all-reduce between computing and applying an update:
//! `begin_batch` ingests a sampler batch, `next_update` produces the next
//! pending update (loss + gradients), and `apply_update` applies it (with
//! optionally overridden gradients) and advances target networks and
//! priorities.

mod dqn;
mod pg;
mod qpg;
mod r2d1;
mod target;

pub use dqn::{
    categorical_loss, dqn_loss, double_target, dueling_aggregate, project_distribution,
    CategoricalCfg, DqnAlgorithm, DqnConfig,
};
pub use pg::{compute_gae, pg_loss, PgAlgorithm, PgConfig, PgVariant};
pub use qpg::{actor_loss, critic_loss, QpgAlgorithm, QpgConfig};
pub use r2d1::{r2d1_loss, sequence_inputs, value_rescale, value_rescale_inv, R2d1Algorithm, R2d1Config};
pub use target::{target_sync, TargetSync};

use crate::error::Result;
use crate::nn::{GradSet, ParamSet};
use crate::replay::ReplayKey;
use crate::sampler::SampleBatchOut;

/// Per-update diagnostics logged on a training-batch basis.
#[derive(Clone, Debug, Default)]
pub struct OptInfo {
    pub loss: f64,
    pub grad_norm: f64,
    pub td_abs_mean: Option<f64>,
    pub entropy: Option<f64>,
}

impl OptInfo {
    pub fn ensure_finite(&self) -> Result<()> {
        if self.loss.is_finite() && self.grad_norm.is_finite() {
            Ok(())
        } else {
            Err(crate::error::Error::NonFinite("optimization info".into()))
        }
    }
}

/// An update computed but not yet applied: gradients plus the priority
/// write-backs that belong to it.
pub struct PendingUpdate {
    pub grads: GradSet,
    pub info: OptInfo,
    pub(crate) priority_keys: Vec<ReplayKey>,
    pub(crate) priority_values: Vec<f64>,
    pub(crate) seq_priority_values: Vec<Vec<f64>>,
}

impl PendingUpdate {
    pub fn new(grads: GradSet, info: OptInfo) -> Self {
        PendingUpdate {
            grads,
            info,
            priority_keys: Vec::new(),
            priority_values: Vec::new(),
            seq_priority_values: Vec::new(),
        }
    }
}

pub trait Algorithm: Send {
    /// Current training parameters (published to agents by the runner).
    fn params(&self) -> &ParamSet;

    /// Number of applied updates; doubles as the published version counter.
    fn version(&self) -> u64;

    /// Environment steps to collect before learning starts.
    fn min_steps_learn(&self) -> usize;

    /// Ingest one sampler batch (append to replay, or stage on-policy
    /// minibatch plans).
    fn begin_batch(&mut self, batch: &SampleBatchOut) -> Result<()>;

    /// Compute the next pending update, or `None` when the batch's update
    /// budget is exhausted.
    fn next_update(&mut self) -> Result<Option<PendingUpdate>>;

    /// Apply an update; `grads_override` substitutes all-reduced gradients
    /// in synchronous multi-learner mode.
    fn apply_update(&mut self, update: PendingUpdate, grads_override: Option<&GradSet>) -> Result<()>;
}
