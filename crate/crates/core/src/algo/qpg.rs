//! Q-value policy gradients: DDPG and TD3 (twin critics, target smoothing,
//! delayed policy updates).

use super::target::{target_sync, TargetSync};
use super::{Algorithm, OptInfo, PendingUpdate};
use crate::agent::{derive_stream, Realm, StreamDomain};
use crate::error::{Error, Result};
use crate::nn::{
    adam_update, mlp_backward, mlp_forward, AdamHyper, AdamState, GradSet, MlpConfig, Nonlinearity,
    ParamSet, Tensor,
};
use crate::replay::{ActionBatch, NStepReplay, TransitionBatch};
use crate::sampler::SampleBatchOut;
use crate::sarray::StructSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::sync::{Arc, RwLock};

#[derive(Clone, Debug)]
pub struct QpgConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub tau: f64,
    /// Exploration noise sigma used by the sampling agent (recorded here so
    /// configs round-trip).
    pub exploration_sigma: f64,
    /// Twin critics + smoothed targets + delayed policy (TD3); off for
    /// plain DDPG.
    pub twin: bool,
    pub target_noise_sigma: f64,
    pub target_noise_clip: f64,
    pub policy_delay: u64,
    pub batch_size: usize,
    pub min_steps_learn: usize,
    pub updates_per_batch: usize,
    pub replay_capacity_t: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub grad_clip: f64,
}

impl QpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) || self.tau == 0.0 {
            return Err(Error::InvalidConfig("tau must be in (0, 1]".into()));
        }
        if self.policy_delay == 0 {
            return Err(Error::InvalidConfig("policy_delay must be >= 1".into()));
        }
        Ok(())
    }
}

fn merge(named: &[(&str, &ParamSet)]) -> ParamSet {
    let mut out = ParamSet::new();
    for (prefix, set) in named {
        for (name, t) in set.iter() {
            out.push(&format!("{prefix}/{name}"), t.clone());
        }
    }
    out
}

fn split(merged: &ParamSet, prefix: &str, like: &ParamSet) -> ParamSet {
    let mut out = ParamSet::new();
    for (name, _) in like.iter() {
        out.push(name, merged.get(&format!("{prefix}/{name}")).clone());
    }
    out
}

pub struct QpgAlgorithm {
    cfg: QpgConfig,
    actor_cfg: MlpConfig,
    critic_cfg: MlpConfig,
    actor: ParamSet,
    critic1: ParamSet,
    critic2: ParamSet,
    actor_target: ParamSet,
    critic1_target: ParamSet,
    critic2_target: ParamSet,
    adam_actor: AdamState,
    adam_c1: AdamState,
    adam_c2: AdamState,
    replay: Arc<RwLock<NStepReplay>>,
    sample_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    updates: u64,
    steps_seen: usize,
    updates_left: usize,
}

impl QpgAlgorithm {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cfg: QpgConfig,
        actor: ParamSet,
        critic1: ParamSet,
        critic2: ParamSet,
        batch_spec: &StructSpec,
        batch_b: usize,
        obs_dim: usize,
        act_dim: usize,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor_cfg = MlpConfig {
            input_dim: obs_dim,
            hidden: cfg.actor_hidden.clone(),
            output_dim: act_dim,
            nonlinearity: cfg.nonlinearity,
            dueling: false,
            atoms: None,
        };
        let critic_cfg = MlpConfig {
            input_dim: obs_dim + act_dim,
            hidden: cfg.critic_hidden.clone(),
            output_dim: 1,
            nonlinearity: cfg.nonlinearity,
            dueling: false,
            atoms: None,
        };
        let replay = NStepReplay::new(
            batch_spec,
            cfg.replay_capacity_t,
            batch_b,
            cfg.gamma,
            cfg.n_step,
            None,
        )?;
        let adam_actor = AdamState::new(&actor, AdamHyper { lr: cfg.actor_lr, ..Default::default() });
        let adam_c1 = AdamState::new(&critic1, AdamHyper { lr: cfg.critic_lr, ..Default::default() });
        let adam_c2 = AdamState::new(&critic2, AdamHyper { lr: cfg.critic_lr, ..Default::default() });
        Ok(QpgAlgorithm {
            actor_target: actor.clone(),
            critic1_target: critic1.clone(),
            critic2_target: critic2.clone(),
            adam_actor,
            adam_c1,
            adam_c2,
            actor,
            critic1,
            critic2,
            actor_cfg,
            critic_cfg,
            replay: Arc::new(RwLock::new(replay)),
            sample_rng: derive_stream(master_seed, realm, StreamDomain::ReplaySampling, 0),
            noise_rng: derive_stream(master_seed, realm, StreamDomain::ReplaySampling, 7),
            updates: 0,
            steps_seen: 0,
            updates_left: 0,
            cfg,
        })
    }

    pub fn replay_handle(&self) -> Arc<RwLock<NStepReplay>> {
        self.replay.clone()
    }

    pub fn grant_updates(&mut self, n: usize) {
        self.updates_left += n;
        self.steps_seen = self.cfg.min_steps_learn;
    }

    fn critic_input(&self, obs: &Tensor, actions: &Tensor) -> Tensor {
        let k = obs.shape()[0];
        let od = obs.shape()[1];
        let ad = actions.shape()[1];
        let mut x = Tensor::zeros(&[k, od + ad]);
        for i in 0..k {
            x.data_mut()[i * (od + ad)..i * (od + ad) + od]
                .copy_from_slice(&obs.data()[i * od..(i + 1) * od]);
            x.data_mut()[i * (od + ad) + od..(i + 1) * (od + ad)]
                .copy_from_slice(&actions.data()[i * ad..(i + 1) * ad]);
        }
        x
    }

    /// Target action `tanh(actor_target(s')) (+ clipped smoothing noise)`.
    fn target_actions(&mut self, next_obs: &Tensor) -> Result<Tensor> {
        let (pre, _) = mlp_forward(&self.actor_target, &self.actor_cfg, next_obs)?;
        let k = pre.shape()[0];
        let ad = pre.shape()[1];
        let mut out = Tensor::zeros(&[k, ad]);
        for i in 0..k * ad {
            let mut a = pre.data()[i].tanh();
            if self.cfg.twin && self.cfg.target_noise_sigma > 0.0 {
                let eps: f64 = self.noise_rng.sample(StandardNormal);
                let noise = (self.cfg.target_noise_sigma * eps)
                    .clamp(-self.cfg.target_noise_clip, self.cfg.target_noise_clip);
                a = (a + noise).clamp(-1.0, 1.0);
            }
            out.data_mut()[i] = a;
        }
        Ok(out)
    }

    fn critic_targets(&mut self, batch: &TransitionBatch) -> Result<Vec<f64>> {
        let next_actions = self.target_actions(&batch.next_obs)?;
        let x = self.critic_input(&batch.next_obs, &next_actions);
        let (q1, _) = mlp_forward(&self.critic1_target, &self.critic_cfg, &x)?;
        let q2 = if self.cfg.twin {
            Some(mlp_forward(&self.critic2_target, &self.critic_cfg, &x)?.0)
        } else {
            None
        };
        let k = batch.return_n.len();
        let mut y = Vec::with_capacity(k);
        for i in 0..k {
            let q = match &q2 {
                Some(q2) => q1.data()[i].min(q2.data()[i]),
                None => q1.data()[i],
            };
            y.push(batch.return_n[i] + batch.gamma_n[i] * (1.0 - batch.done_n[i]) * q);
        }
        Ok(y)
    }
}

/// MSE critic loss against fixed targets; returns grads and |delta|s.
pub fn critic_loss(
    critic: &ParamSet,
    critic_cfg: &MlpConfig,
    x: &Tensor,
    targets: &[f64],
) -> Result<(f64, GradSet, Vec<f64>)> {
    let k = targets.len();
    let (q, cache) = mlp_forward(critic, critic_cfg, x)?;
    let mut upstream = Tensor::zeros(&[k, 1]);
    let mut loss = 0.0;
    let mut deltas = Vec::with_capacity(k);
    for i in 0..k {
        let delta = q.data()[i] - targets[i];
        loss += delta * delta / k as f64;
        upstream.data_mut()[i] = 2.0 * delta / k as f64;
        deltas.push(delta.abs());
    }
    let (grads, _) = mlp_backward(critic, critic_cfg, &cache, &upstream)?;
    Ok((loss, grads, deltas))
}

/// Deterministic policy-gradient actor loss `-mean Q1(s, tanh(actor(s)))`.
pub fn actor_loss(
    actor: &ParamSet,
    actor_cfg: &MlpConfig,
    critic: &ParamSet,
    critic_cfg: &MlpConfig,
    obs: &Tensor,
) -> Result<(f64, GradSet)> {
    let k = obs.shape()[0];
    let od = obs.shape()[1];
    let ad = actor_cfg.output_dim;
    let (pre, actor_cache) = mlp_forward(actor, actor_cfg, obs)?;
    let actions = Tensor::from_vec(
        &[k, ad],
        pre.data().iter().map(|&v| v.tanh()).collect(),
    );
    let mut x = Tensor::zeros(&[k, od + ad]);
    for i in 0..k {
        x.data_mut()[i * (od + ad)..i * (od + ad) + od]
            .copy_from_slice(&obs.data()[i * od..(i + 1) * od]);
        x.data_mut()[i * (od + ad) + od..(i + 1) * (od + ad)]
            .copy_from_slice(&actions.data()[i * ad..(i + 1) * ad]);
    }
    let (q, critic_cache) = mlp_forward(critic, critic_cfg, &x)?;
    let loss = -q.data().iter().sum::<f64>() / k as f64;
    // d(-mean q)/dq = -1/k, flow through the critic input to the action part
    let upstream = Tensor::from_vec(&[k, 1], vec![-1.0 / k as f64; k]);
    let (_, dx) = mlp_backward(critic, critic_cfg, &critic_cache, &upstream)?;
    let mut d_pre = Tensor::zeros(&[k, ad]);
    for i in 0..k {
        for d in 0..ad {
            let da = dx.data()[i * (od + ad) + od + d];
            let a = actions.data()[i * ad + d];
            d_pre.data_mut()[i * ad + d] = da * (1.0 - a * a); // through tanh
        }
    }
    let (grads, _) = mlp_backward(actor, actor_cfg, &actor_cache, &d_pre)?;
    Ok((loss, grads))
}

impl Algorithm for QpgAlgorithm {
    fn params(&self) -> &ParamSet {
        &self.actor
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
            replay.sample_uniform(self.cfg.batch_size, &mut self.sample_rng)?
        };
        self.updates_left -= 1;
        let actions = match &batch.actions {
            ActionBatch::Continuous(a) => a.clone(),
            ActionBatch::Discrete(_) => {
                return Err(Error::InvalidAction("qpg requires continuous actions".into()))
            }
        };
        let targets = self.critic_targets(&batch)?;
        let x = self.critic_input(&batch.obs, &actions);
        let (l1, g1, deltas) = critic_loss(&self.critic1, &self.critic_cfg, &x, &targets)?;
        let (l2, g2) = if self.cfg.twin {
            let (l2, g2, _) = critic_loss(&self.critic2, &self.critic_cfg, &x, &targets)?;
            (l2, g2)
        } else {
            (0.0, self.critic2.zeros_like())
        };
        // the actor updates every policy_delay-th update
        let actor_turn = (self.updates + 1) % self.cfg.policy_delay == 0;
        let (la, ga) = if actor_turn {
            actor_loss(&self.actor, &self.actor_cfg, &self.critic1, &self.critic_cfg, &batch.obs)?
        } else {
            (0.0, self.actor.zeros_like())
        };
        let merged = merge(&[("actor", &ga), ("c1", &g1), ("c2", &g2)]);
        let td_abs_mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        Ok(Some(PendingUpdate::new(merged, OptInfo {
            loss: l1 + l2 + la,
            grad_norm: 0.0,
            td_abs_mean: Some(td_abs_mean),
            entropy: None,
        })))
    }

    fn apply_update(&mut self, update: PendingUpdate, grads_override: Option<&GradSet>) -> Result<()> {
        let merged = match grads_override {
            Some(g) => g.clone(),
            None => update.grads,
        };
        let mut ga = split(&merged, "actor", &self.actor);
        let mut g1 = split(&merged, "c1", &self.critic1);
        let mut g2 = split(&merged, "c2", &self.critic2);
        let norm = if self.cfg.grad_clip > 0.0 {
            let na = ga.clip_norm(self.cfg.grad_clip);
            let n1 = g1.clip_norm(self.cfg.grad_clip);
            let n2 = g2.clip_norm(self.cfg.grad_clip);
            na.max(n1).max(n2)
        } else {
            ga.l2_norm().max(g1.l2_norm()).max(g2.l2_norm())
        };
        adam_update(&mut self.critic1, &g1, &mut self.adam_c1)?;
        if self.cfg.twin {
            adam_update(&mut self.critic2, &g2, &mut self.adam_c2)?;
        }
        let actor_turn = (self.updates + 1) % self.cfg.policy_delay == 0;
        if actor_turn {
            adam_update(&mut self.actor, &ga, &mut self.adam_actor)?;
            target_sync(&self.actor, &mut self.actor_target, TargetSync::Soft(self.cfg.tau), 0);
            target_sync(&self.critic1, &mut self.critic1_target, TargetSync::Soft(self.cfg.tau), 0);
            if self.cfg.twin {
                target_sync(&self.critic2, &mut self.critic2_target, TargetSync::Soft(self.cfg.tau), 0);
            }
        } else if !self.cfg.twin {
            target_sync(&self.critic1, &mut self.critic1_target, TargetSync::Soft(self.cfg.tau), 0);
        }
        self.updates += 1;
        let mut info = update.info;
        info.grad_norm = norm;
        info.ensure_finite()
    }
}
