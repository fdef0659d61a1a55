//! Deep Q-learning with the double, dueling, categorical, n-step, and
//! prioritized variants.

use super::target::{target_sync, TargetSync};
use super::{Algorithm, OptInfo, PendingUpdate};
use crate::agent::{derive_stream, Realm, StreamDomain};
use crate::error::{Error, Result};
use crate::nn::{
    adam_update, log_softmax, mlp_backward, mlp_forward, softmax, AdamHyper, AdamState, GradSet,
    MlpConfig, Nonlinearity, ParamSet, Tensor,
};
use crate::replay::{ActionBatch, NStepReplay, PrioritySpec, TransitionBatch};
use crate::sampler::SampleBatchOut;
use crate::sarray::StructSpec;
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, RwLock};

#[derive(Clone, Debug)]
pub struct CategoricalCfg {
    pub atoms: usize,
    pub v_min: f64,
    pub v_max: f64,
}

impl CategoricalCfg {
    pub fn support(&self) -> Vec<f64> {
        let k = self.atoms.max(2);
        (0..k)
            .map(|i| self.v_min + (self.v_max - self.v_min) * i as f64 / (k - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct DqnConfig {
    pub gamma: f64,
    pub n_step: usize,
    pub double: bool,
    pub dueling: bool,
    pub categorical: Option<CategoricalCfg>,
    pub target: TargetSync,
    pub lr: f64,
    pub batch_size: usize,
    pub min_steps_learn: usize,
    pub updates_per_batch: usize,
    pub replay_capacity_t: usize,
    pub prioritized: Option<PrioritySpec>,
    pub hidden: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub grad_clip: f64,
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.categorical {
            if c.v_min >= c.v_max {
                return Err(Error::InvalidConfig("v_min must be below v_max".into()));
            }
            if c.atoms < 2 {
                return Err(Error::InvalidConfig("need at least two atoms".into()));
            }
        }
        if let TargetSync::Hard(0) = self.target {
            return Err(Error::InvalidConfig("hard target period must be >= 1".into()));
        }
        if let TargetSync::Soft(tau) = self.target {
            if !(0.0..=1.0).contains(&tau) || tau == 0.0 {
                return Err(Error::InvalidConfig("soft tau must be in (0, 1]".into()));
            }
        }
        Ok(())
    }

    pub fn net_config(&self, obs_dim: usize, n_actions: usize) -> MlpConfig {
        MlpConfig {
            input_dim: obs_dim,
            hidden: self.hidden.clone(),
            output_dim: n_actions,
            nonlinearity: self.nonlinearity,
            dueling: self.dueling,
            atoms: self.categorical.as_ref().map(|c| c.atoms),
        }
    }
}

/// `q = v + a - mean(a)` over the action dim (mean-advantage dueling form).
pub fn dueling_aggregate(v: &Tensor, a: &Tensor, n_actions: usize, atoms: usize) -> Tensor {
    crate::nn::dueling_combine(v, a, n_actions, atoms)
}

/// Distributional Bellman projection of `r + gamma_eff * z` onto the fixed
/// support, linearly interpolating mass between neighbor atoms.
pub fn project_distribution(
    target_probs: &[f64],
    return_n: f64,
    gamma_eff: f64,
    support: &[f64],
) -> Vec<f64> {
    let k = support.len();
    let v_min = support[0];
    let v_max = support[k - 1];
    let dz = (v_max - v_min) / (k - 1) as f64;
    let mut m = vec![0.0f64; k];
    for (j, &p) in target_probs.iter().enumerate() {
        let tz = (return_n + gamma_eff * support[j]).clamp(v_min, v_max);
        let b = (tz - v_min) / dz;
        let l = b.floor() as usize;
        let u = b.ceil() as usize;
        if l == u {
            m[l] += p;
        } else {
            m[l] += p * (u as f64 - b);
            m[u] += p * (b - l as f64);
        }
    }
    m
}

fn huber(delta: f64) -> f64 {
    let a = delta.abs();
    if a <= 1.0 {
        0.5 * delta * delta
    } else {
        a - 0.5
    }
}

fn huber_grad(delta: f64) -> f64 {
    delta.clamp(-1.0, 1.0)
}

/// Scalar-q loss: Huber TD error against
/// `y = ret_n + gamma_n (1 - done_n) max_a q_target(s', a)`, with the
/// double-DQN action selection when enabled. Returns per-sample |delta| for
/// priority updates.
pub fn dqn_loss(
    params: &ParamSet,
    target_params: &ParamSet,
    net_cfg: &MlpConfig,
    double: bool,
    batch: &TransitionBatch,
) -> Result<(f64, GradSet, Vec<f64>)> {
    let k = batch.return_n.len();
    let actions = match &batch.actions {
        ActionBatch::Discrete(a) => a,
        ActionBatch::Continuous(_) => {
            return Err(Error::InvalidAction("dqn requires discrete actions".into()))
        }
    };
    let (q_all, cache) = mlp_forward(params, net_cfg, &batch.obs)?;
    let (q_next_target, _) = mlp_forward(target_params, net_cfg, &batch.next_obs)?;
    let q_next_online = if double {
        Some(mlp_forward(params, net_cfg, &batch.next_obs)?.0)
    } else {
        None
    };
    let n_actions = net_cfg.output_dim;
    let mut upstream = Tensor::zeros(&[k, n_actions]);
    let mut loss = 0.0;
    let mut deltas = Vec::with_capacity(k);
    for i in 0..k {
        let a = actions[i] as usize;
        let bootstrap = if batch.done_n[i] > 0.5 {
            0.0
        } else {
            let trow = q_next_target.row(i);
            let a_star = match &q_next_online {
                Some(online) => crate::agent::argmax(online.row(i)),
                None => crate::agent::argmax(trow),
            };
            trow[a_star]
        };
        let y = batch.return_n[i] + batch.gamma_n[i] * (1.0 - batch.done_n[i]) * bootstrap;
        let delta = y - q_all.row(i)[a];
        let w = batch.is_weights[i];
        loss += w * huber(delta) / k as f64;
        upstream.row_mut(i)[a] = -w * huber_grad(delta) / k as f64;
        deltas.push(delta.abs());
    }
    let (grads, _) = mlp_backward(params, net_cfg, &cache, &upstream)?;
    Ok((loss, grads, deltas))
}

/// Categorical (distributional) loss: cross-entropy between the projected
/// target distribution and the online distribution at the taken action.
pub fn categorical_loss(
    params: &ParamSet,
    target_params: &ParamSet,
    net_cfg: &MlpConfig,
    support: &[f64],
    double: bool,
    batch: &TransitionBatch,
) -> Result<(f64, GradSet, Vec<f64>)> {
    let k = batch.return_n.len();
    let atoms = support.len();
    let actions = match &batch.actions {
        ActionBatch::Discrete(a) => a,
        ActionBatch::Continuous(_) => {
            return Err(Error::InvalidAction("dqn requires discrete actions".into()))
        }
    };
    let (logits, cache) = mlp_forward(params, net_cfg, &batch.obs)?;
    let (t_logits, _) = mlp_forward(target_params, net_cfg, &batch.next_obs)?;
    let o_logits = if double {
        Some(mlp_forward(params, net_cfg, &batch.next_obs)?.0)
    } else {
        None
    };
    let n_actions = net_cfg.output_dim;
    let mut upstream = Tensor::zeros(&[k, n_actions * atoms]);
    let mut loss = 0.0;
    let mut deltas = Vec::with_capacity(k);
    for i in 0..k {
        let a = actions[i] as usize;
        // pick the bootstrap action by expected value
        let expected = |row: &[f64], act: usize| -> f64 {
            let probs = softmax(&row[act * atoms..(act + 1) * atoms]);
            probs.iter().zip(support).map(|(&p, &z)| p * z).sum()
        };
        let select_row = match &o_logits {
            Some(online) => online.row(i),
            None => t_logits.row(i),
        };
        let mut a_star = 0;
        let mut best = f64::NEG_INFINITY;
        for act in 0..n_actions {
            let v = expected(select_row, act);
            if v > best {
                best = v;
                a_star = act;
            }
        }
        let t_probs = softmax(&t_logits.row(i)[a_star * atoms..(a_star + 1) * atoms]);
        let gamma_eff = batch.gamma_n[i] * (1.0 - batch.done_n[i]);
        let m = project_distribution(&t_probs, batch.return_n[i], gamma_eff, support);

        let block = &logits.row(i)[a * atoms..(a + 1) * atoms];
        let lp = log_softmax(block);
        let p = softmax(block);
        let w = batch.is_weights[i];
        let ce: f64 = -m.iter().zip(&lp).map(|(&mj, &l)| mj * l).sum::<f64>();
        loss += w * ce / k as f64;
        for j in 0..atoms {
            upstream.row_mut(i)[a * atoms + j] = w * (p[j] - m[j]) / k as f64;
        }
        // expected-value TD magnitude for priorities
        let target_ev: f64 = m.iter().zip(support).map(|(&mj, &z)| mj * z).sum();
        let online_ev: f64 = p.iter().zip(support).map(|(&pj, &z)| pj * z).sum();
        deltas.push((target_ev - online_ev).abs());
    }
    let (grads, _) = mlp_backward(params, net_cfg, &cache, &upstream)?;
    Ok((loss, grads, deltas))
}

/// Bootstrap values under the double-DQN rule (exposed for oracle tests).
pub fn double_target(online_next: &[f64], target_next: &[f64]) -> f64 {
    target_next[crate::agent::argmax(online_next)]
}

pub struct DqnAlgorithm {
    cfg: DqnConfig,
    net_cfg: MlpConfig,
    support: Option<Vec<f64>>,
    params: ParamSet,
    target_params: ParamSet,
    adam: AdamState,
    /// Shared with the copier role under the readers-writer lock in async
    /// mode; uncontended in the synchronous modes.
    replay: Arc<RwLock<NStepReplay>>,
    rng: ChaCha8Rng,
    updates: u64,
    consumed: usize,
    steps_seen: usize,
    updates_left: usize,
}

impl DqnAlgorithm {
    pub fn new(
        cfg: DqnConfig,
        params: ParamSet,
        batch_spec: &StructSpec,
        batch_b: usize,
        obs_dim: usize,
        n_actions: usize,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        cfg.validate()?;
        let net_cfg = cfg.net_config(obs_dim, n_actions);
        let support = cfg.categorical.as_ref().map(|c| c.support());
        let replay = NStepReplay::new(
            batch_spec,
            cfg.replay_capacity_t,
            batch_b,
            cfg.gamma,
            cfg.n_step,
            cfg.prioritized.clone(),
        )?;
        let target_params = params.clone();
        let adam = AdamState::new(&params, AdamHyper { lr: cfg.lr, ..Default::default() });
        let rng = derive_stream(master_seed, realm, StreamDomain::ReplaySampling, 0);
        Ok(DqnAlgorithm {
            cfg,
            net_cfg,
            support,
            params,
            target_params,
            adam,
            replay: Arc::new(RwLock::new(replay)),
            rng,
            updates: 0,
            consumed: 0,
            steps_seen: 0,
            updates_left: 0,
        })
    }

    /// Handle for the async coordinator's copier role (appends under the
    /// write lock while the optimizer samples under read locks).
    pub fn replay_handle(&self) -> Arc<RwLock<NStepReplay>> {
        self.replay.clone()
    }

    /// Allow `n` more updates (async optimizer throttle path).
    pub fn grant_updates(&mut self, n: usize) {
        self.updates_left += n;
        self.steps_seen = self.cfg.min_steps_learn; // gating handled by the throttle
    }

    fn beta(&self) -> Option<f64> {
        self.cfg.prioritized.as_ref().map(|spec| {
            if spec.beta_anneal_steps == 0 {
                spec.beta
            } else {
                let frac = (self.consumed as f64 / spec.beta_anneal_steps as f64).min(1.0);
                spec.beta + (1.0 - spec.beta) * frac
            }
        })
    }

    fn sample(&mut self) -> Result<Option<TransitionBatch>> {
        let beta = self.beta();
        let batch_size = self.cfg.batch_size;
        let prioritized = self.cfg.prioritized.is_some();
        let batch = {
            let replay = self.replay.read().expect("replay lock poisoned");
            if replay.len_valid() < batch_size {
                return Ok(None);
            }
            if prioritized {
                replay.sample_prioritized(batch_size, &mut self.rng, beta)?
            } else {
                replay.sample_uniform(batch_size, &mut self.rng)?
            }
        };
        self.consumed += batch_size;
        Ok(Some(batch))
    }
}

impl Algorithm for DqnAlgorithm {
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
        let batch = match self.sample()? {
            Some(b) => b,
            None => return Ok(None),
        };
        self.updates_left -= 1;
        let (loss, grads, deltas) = match &self.support {
            Some(z) => categorical_loss(
                &self.params,
                &self.target_params,
                &self.net_cfg,
                z,
                self.cfg.double,
                &batch,
            )?,
            None => dqn_loss(&self.params, &self.target_params, &self.net_cfg, self.cfg.double, &batch)?,
        };
        let td_abs_mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
        let mut update = PendingUpdate::new(grads, OptInfo {
            loss,
            grad_norm: 0.0,
            td_abs_mean: Some(td_abs_mean),
            entropy: None,
        });
        update.priority_keys = batch.keys;
        update.priority_values = deltas;
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
                .update_priorities(&update.priority_keys, &update.priority_values);
        }
        let mut info = update.info;
        info.grad_norm = norm;
        info.ensure_finite()
    }
}
