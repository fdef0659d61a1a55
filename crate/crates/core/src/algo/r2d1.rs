//! Recurrent value learning from sequence replay: stored-state
//! initialization, warmup (burn-in) without loss, n-step double-DQN targets
//! over the train segment, and per-sequence priorities.

use super::target::{target_sync, TargetSync};
use super::{Algorithm, OptInfo, PendingUpdate};
use crate::agent::{derive_stream, Realm, StreamDomain};
use crate::error::Result;
use crate::nn::{
    adam_update, qrnn_backward_seq, qrnn_forward_seq, AdamHyper, AdamState, GradSet, ParamSet,
    QRnnConfig, RnnState, Tensor,
};
use crate::replay::{PrioritySegment, PrioritySpec, SequenceBatch, SequenceReplay, SequenceSpec};
use crate::sampler::SampleBatchOut;
use crate::sarray::StructSpec;
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, RwLock};

/// `h(x) = sign(x) (sqrt(|x| + 1) - 1) + eps x` — invertible value
/// compression used by large-scale recurrent value learners.
pub fn value_rescale(x: f64) -> f64 {
    const EPS: f64 = 1e-3;
    x.signum() * ((x.abs() + 1.0).sqrt() - 1.0) + EPS * x
}

pub fn value_rescale_inv(y: f64) -> f64 {
    const EPS: f64 = 1e-3;
    let s = y.signum();
    let a = ((1.0 + 4.0 * EPS * (y.abs() + 1.0 + EPS)).sqrt() - 1.0) / (2.0 * EPS);
    s * (a * a - 1.0)
}

#[derive(Clone, Debug)]
pub struct R2d1Config {
    pub gamma: f64,
    pub n_step: usize,
    pub lr: f64,
    /// Sequences per update.
    pub batch_size: usize,
    pub min_steps_learn: usize,
    pub updates_per_batch: usize,
    pub target: TargetSync,
    pub seq: SequenceSpec,
    pub replay_capacity_t: usize,
    pub prioritized: Option<PrioritySpec>,
    /// Max/mean mixture coefficient for sequence priorities.
    pub priority_eta: f64,
    pub priority_segment: PrioritySegment,
    /// Compute initial priorities from recorded-q n-step TD errors instead
    /// of max-seen.
    pub td_initial_priorities: bool,
    pub value_rescale: bool,
    pub hidden_dim: usize,
    pub grad_clip: f64,
}

pub struct R2d1Algorithm {
    cfg: R2d1Config,
    net_cfg: QRnnConfig,
    params: ParamSet,
    target_params: ParamSet,
    adam: AdamState,
    replay: Arc<RwLock<SequenceReplay>>,
    rng: ChaCha8Rng,
    updates: u64,
    steps_seen: usize,
    updates_left: usize,
}

impl R2d1Algorithm {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cfg: R2d1Config,
        params: ParamSet,
        batch_spec: &StructSpec,
        batch_b: usize,
        obs_dim: usize,
        n_actions: usize,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        let net_cfg = QRnnConfig {
            input_dim: obs_dim + n_actions + 1,
            hidden_dim: cfg.hidden_dim,
            n_actions,
        };
        let replay = SequenceReplay::new(
            batch_spec,
            cfg.replay_capacity_t,
            batch_b,
            cfg.seq.clone(),
            cfg.gamma,
            cfg.n_step,
            cfg.prioritized.clone().map(|spec| {
                (spec, cfg.priority_eta, cfg.priority_segment, cfg.td_initial_priorities)
            }),
        )?;
        let target_params = params.clone();
        let adam = AdamState::new(&params, AdamHyper { lr: cfg.lr, ..Default::default() });
        let rng = derive_stream(master_seed, realm, StreamDomain::ReplaySampling, 2);
        let _ = obs_dim;
        Ok(R2d1Algorithm {
            cfg,
            net_cfg,
            params,
            target_params,
            adam,
            replay: Arc::new(RwLock::new(replay)),
            rng,
            updates: 0,
            steps_seen: 0,
            updates_left: 0,
        })
    }

    pub fn replay_handle(&self) -> Arc<RwLock<SequenceReplay>> {
        self.replay.clone()
    }

    pub fn net_config(&self) -> &QRnnConfig {
        &self.net_cfg
    }
}

/// Model inputs `[len, k, obs + onehot(prev_action) + prev_reward]`
/// reconstructed from stored columns, plus the reset mask (state zeroed at
/// episode starts, exactly as sampling did).
pub fn sequence_inputs(batch: &SequenceBatch, n_actions: usize) -> (Tensor, Vec<bool>) {
    let len = batch.len_ext;
    let k = batch.k;
    let obs_dim = batch.obs_dim;
    let in_dim = obs_dim + n_actions + 1;
    let mut x = Tensor::zeros(&[len, k, in_dim]);
    let mut resets = vec![false; len * k];
    for t in 0..len {
        for i in 0..k {
            let idx = t * k + i;
            let base = idx * in_dim;
            for d in 0..obs_dim {
                x.data_mut()[base + d] = batch.obs[idx * obs_dim + d] as f64;
            }
            let pa = batch.prev_actions[idx];
            if pa >= 0 && (pa as usize) < n_actions {
                x.data_mut()[base + obs_dim + pa as usize] = 1.0;
            }
            x.data_mut()[base + obs_dim + n_actions] = batch.prev_rewards[idx] as f64;
            if t > 0 {
                resets[idx] = batch.done[(t - 1) * k + i];
            }
        }
    }
    (x, resets)
}

/// Loss over the train segment with stored-state warmup. Returns gradients
/// and the per-sequence TD magnitudes for priority aggregation.
#[allow(clippy::too_many_arguments)]
pub fn r2d1_loss(
    params: &ParamSet,
    target_params: &ParamSet,
    net_cfg: &QRnnConfig,
    cfg: &R2d1Config,
    batch: &SequenceBatch,
) -> Result<(f64, GradSet, Vec<Vec<f64>>, f64)> {
    let k = batch.k;
    let len = batch.len_ext;
    let n_actions = net_cfg.n_actions;
    let (x, resets) = sequence_inputs(batch, n_actions);
    let h0 = {
        let mut m = Tensor::zeros(&[k, net_cfg.hidden_dim]);
        m.data_mut().copy_from_slice(&batch.init_state);
        RnnState::from_matrix(&m)
    };
    let (q_online, _, cache) = qrnn_forward_seq(params, &x, &h0, Some(&resets))?;
    let (q_target, _, _) = qrnn_forward_seq(target_params, &x, &h0, Some(&resets))?;

    let warmup = batch.warmup_t;
    let train = batch.train_t;
    let gamma = cfg.gamma;
    let n = cfg.n_step;
    let mut upstream = Tensor::zeros(&[len, k, n_actions]);
    let mut loss = 0.0;
    let mut td_sum = 0.0;
    let mut per_seq: Vec<Vec<f64>> = vec![Vec::new(); k];
    let count = (train * k) as f64;
    for i in 0..k {
        // per-sequence priority rows (configured half or full segment)
        let (prio_lo, prio_hi) = segment_rows(cfg, warmup, train);
        for t in warmup..warmup + train {
            // n-step return truncated at the first done inside the window
            let mut acc = 0.0;
            let mut disc = 1.0;
            let mut done_n = false;
            let mut steps = n;
            for j in 0..n {
                let idx = (t + j) * k + i;
                acc += disc * batch.rewards[idx] as f64;
                disc *= gamma;
                if batch.done[idx] {
                    if !batch.timeouts[idx] {
                        done_n = true;
                    }
                    steps = j + 1;
                    break;
                }
            }
            let bootstrap = if done_n {
                0.0
            } else {
                let tb = t + steps;
                let online_row = &q_online.data()[(tb * k + i) * n_actions..(tb * k + i + 1) * n_actions];
                let a_star = crate::agent::argmax(online_row);
                let tgt = q_target.data()[(tb * k + i) * n_actions + a_star];
                if cfg.value_rescale {
                    value_rescale_inv(tgt)
                } else {
                    tgt
                }
            };
            let raw_y = acc + disc * if done_n { 0.0 } else { bootstrap };
            let y = if cfg.value_rescale { value_rescale(raw_y) } else { raw_y };
            let idx = t * k + i;
            let a = batch.actions[idx] as usize;
            let q_sa = q_online.data()[idx * n_actions + a];
            let delta = y - q_sa;
            let w = batch.is_weights[i];
            let huber = if delta.abs() <= 1.0 { 0.5 * delta * delta } else { delta.abs() - 0.5 };
            loss += w * huber / count;
            upstream.data_mut()[idx * n_actions + a] = -w * delta.clamp(-1.0, 1.0) / count;
            td_sum += delta.abs();
            if t >= prio_lo && t < prio_hi {
                per_seq[i].push(delta.abs());
            }
        }
    }
    let grads = qrnn_backward_seq(params, &cache, &upstream);
    Ok((loss, grads, per_seq, td_sum / count))
}

fn segment_rows(cfg: &R2d1Config, warmup: usize, train: usize) -> (usize, usize) {
    match cfg.priority_segment {
        PrioritySegment::Full => (warmup, warmup + train),
        PrioritySegment::FirstHalf => (warmup, warmup + train.div_ceil(2)),
        PrioritySegment::SecondHalf => (warmup + train / 2, warmup + train),
    }
}

impl Algorithm for R2d1Algorithm {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn version(&self) -> u64 {
        self.updates
    }

    fn min_steps_learn(&self) -> usize {
        self.cfg.min_steps_learn
    }

    fn begin_batch(&mut self, batch: &SampleBatchOut) -> Result<()> {
        self.replay.write().expect("replay lock poisoned").append_batch(&batch.arr)?;
        self.steps_seen = batch.cum_env_steps;
        self.updates_left = if self.steps_seen >= self.cfg.min_steps_learn {
            self.cfg.updates_per_batch
        } else {
            0
        };
        Ok(())
    }

    fn next_update(&mut self) -> Result<Option<PendingUpdate>> {
        if self.updates_left == 0 || self.steps_seen < self.cfg.min_steps_learn {
            return Ok(None);
        }
        let batch = {
            let replay = self.replay.read().expect("replay lock poisoned");
            if replay.len_valid() < self.cfg.batch_size {
                return Ok(None);
            }
            replay.sample_sequences(self.cfg.batch_size, &mut self.rng)?
        };
        self.updates_left -= 1;
        let (loss, grads, per_seq, td_abs_mean) =
            r2d1_loss(&self.params, &self.target_params, &self.net_cfg, &self.cfg, &batch)?;
        let mut update = PendingUpdate::new(grads, OptInfo {
            loss,
            grad_norm: 0.0,
            td_abs_mean: Some(td_abs_mean),
            entropy: None,
        });
        update.priority_keys = batch.keys;
        update.seq_priority_values = per_seq;
        Ok(Some(update))
    }

    fn apply_update(&mut self, update: PendingUpdate, grads_override: Option<&GradSet>) -> Result<()> {
        let mut grads = match grads_override {
            Some(g) => g.clone(),
            None => update.grads,
        };
        let norm = grads.clip_norm(self.cfg.grad_clip);
        adam_update(&mut self.params, &grads, &mut self.adam)?;
        self.updates += 1;
        target_sync(&self.params, &mut self.target_params, self.cfg.target, self.updates);
        if self.cfg.prioritized.is_some() && !update.priority_keys.is_empty() {
            self.replay
                .write()
                .expect("replay lock poisoned")
                .update_priorities(&update.priority_keys, &update.seq_priority_values);
        }
        let mut info = update.info;
        info.grad_norm = norm;
        info.ensure_finite()
    }
}
