//! Policy gradients: A2C and PPO with generalized advantage estimation.

use super::{Algorithm, OptInfo, PendingUpdate};
use crate::agent::{derive_stream, Realm, StreamDomain};
use crate::error::{Error, Result};
use crate::nn::{
    ac_backward, ac_forward, adam_update, log_softmax, softmax, AcConfig, AdamHyper, AdamState,
    GradSet, Nonlinearity, ParamSet, Tensor,
};
use crate::sampler::{BatchLeaves, SampleBatchOut};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgVariant {
    A2c,
    Ppo,
}

#[derive(Clone, Debug)]
pub struct PgConfig {
    pub variant: PgVariant,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    /// PPO passes over the batch; A2C always runs one full-batch update.
    pub epochs: usize,
    pub minibatches: usize,
    pub clip_eps: f64,
    pub grad_clip: f64,
    /// Per-batch advantage normalization (on for PPO, off for A2C by
    /// convention).
    pub normalize_adv: bool,
    pub hidden: Vec<usize>,
    pub nonlinearity: Nonlinearity,
}

impl PgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::InvalidConfig("gae_lambda must be in [0, 1]".into()));
        }
        if self.clip_eps <= 0.0 {
            return Err(Error::InvalidConfig("clip_eps must be positive".into()));
        }
        Ok(())
    }
}

/// Generalized advantage estimation over `[T, B]` arrays (row-major
/// `t * b_len + b`). `dones` marks episode boundaries; timeout entries
/// bootstrap through the boundary per the time-limit convention. Returns
/// `(advantages, returns)` with `returns = advantages + values`.
#[allow(clippy::too_many_arguments)]
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    timeouts: &[bool],
    bootstrap: &[f64],
    t_len: usize,
    b_len: usize,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut adv = vec![0.0; t_len * b_len];
    let mut ret = vec![0.0; t_len * b_len];
    for b in 0..b_len {
        let mut adv_next = 0.0;
        let mut v_next = bootstrap[b];
        for t in (0..t_len).rev() {
            let i = t * b_len + b;
            // timeouts bootstrap: the done flag is masked out in both the
            // TD residual and the lambda recursion
            let nonterminal = if dones[i] && !timeouts[i] { 0.0 } else { 1.0 };
            let delta = rewards[i] + gamma * nonterminal * v_next - values[i];
            adv[i] = delta + gamma * lambda * nonterminal * adv_next;
            ret[i] = adv[i] + values[i];
            adv_next = adv[i];
            v_next = values[i];
        }
    }
    (adv, ret)
}

struct Staged {
    obs: Tensor,          // [N, obs_dim]
    actions: Vec<usize>,
    old_log_probs: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
    plan: Vec<Vec<usize>>, // minibatch index lists, consumed front to back
    cursor: usize,
}

pub struct PgAlgorithm {
    cfg: PgConfig,
    ac_cfg: AcConfig,
    params: ParamSet,
    adam: AdamState,
    shuffle_rng: ChaCha8Rng,
    updates: u64,
    staged: Option<Staged>,
    leaves: Option<BatchLeaves>,
}

impl PgAlgorithm {
    pub fn new(
        cfg: PgConfig,
        params: ParamSet,
        obs_dim: usize,
        n_actions: usize,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        cfg.validate()?;
        let ac_cfg = AcConfig {
            obs_dim,
            hidden: cfg.hidden.clone(),
            n_actions,
            nonlinearity: cfg.nonlinearity,
        };
        let adam = AdamState::new(&params, AdamHyper { lr: cfg.lr, ..Default::default() });
        let shuffle_rng = derive_stream(master_seed, realm, StreamDomain::MinibatchShuffle, 0);
        Ok(PgAlgorithm { cfg, ac_cfg, params, adam, shuffle_rng, updates: 0, staged: None, leaves: None })
    }

    pub fn ac_config(&self) -> &AcConfig {
        &self.ac_cfg
    }

    fn stage(&mut self, batch: &SampleBatchOut) -> Result<()> {
        let dims = batch.arr.leading();
        let (t_len, b_len) = (dims[0], dims[1]);
        let n = t_len * b_len;
        let leaves = self
            .leaves
            .get_or_insert_with(|| BatchLeaves::from_spec(batch.arr.spec()))
            .clone();
        let obs_dim = batch.arr.leaf(leaves.observation).elem();
        let mut obs = Tensor::zeros(&[n, obs_dim]);
        let mut obs_buf = vec![0.0f32; obs_dim];
        let mut actions = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        let mut timeouts = Vec::with_capacity(n);
        let timeout_leaf = batch.arr.spec().leaf_index("env_info.timeout");
        let log_prob_leaf = batch.arr.spec().leaf_index("agent_info.log_prob");
        let mut old_log_probs = Vec::with_capacity(n);
        for cell in 0..n {
            batch.arr.cell_f32(leaves.observation, cell, &mut obs_buf);
            for (d, &v) in obs_buf.iter().enumerate() {
                obs.data_mut()[cell * obs_dim + d] = v as f64;
            }
            actions.push(batch.arr.get_i64(leaves.action, cell) as usize);
            rewards.push(batch.arr.get_f32(leaves.reward, cell) as f64);
            dones.push(batch.arr.get_bool(leaves.done, cell));
            timeouts.push(match timeout_leaf {
                Some(l) => batch.arr.get_bool(l, cell),
                None => false,
            });
            old_log_probs.push(match log_prob_leaf {
                Some(l) => batch.arr.get_f32(l, cell) as f64,
                None => 0.0,
            });
        }
        // values recomputed under the current (just-published) params
        let (_, values, _) = ac_forward(&self.params, &self.ac_cfg, &obs)?;
        let bootstrap = batch
            .bootstrap_values
            .clone()
            .ok_or_else(|| Error::InvalidConfig("policy gradient needs bootstrap values".into()))?;
        let (mut adv, ret) = compute_gae(
            &rewards,
            values.data(),
            &dones,
            &timeouts,
            &bootstrap,
            t_len,
            b_len,
            self.cfg.gamma,
            self.cfg.gae_lambda,
        );
        if self.cfg.normalize_adv {
            let mean = adv.iter().sum::<f64>() / n as f64;
            let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt().max(1e-8);
            adv.iter_mut().for_each(|a| *a = (*a - mean) / std);
        }
        let plan = match self.cfg.variant {
            PgVariant::A2c => vec![(0..n).collect::<Vec<usize>>()],
            PgVariant::Ppo => {
                let mut plan = Vec::with_capacity(self.cfg.epochs * self.cfg.minibatches);
                let per = n / self.cfg.minibatches.max(1);
                for _ in 0..self.cfg.epochs.max(1) {
                    let mut idx: Vec<usize> = (0..n).collect();
                    idx.shuffle(&mut self.shuffle_rng);
                    for c in 0..self.cfg.minibatches.max(1) {
                        let lo = c * per;
                        let hi = if c + 1 == self.cfg.minibatches { n } else { lo + per };
                        plan.push(idx[lo..hi].to_vec());
                    }
                }
                plan
            }
        };
        self.staged = Some(Staged { obs, actions, old_log_probs, adv, ret, plan, cursor: 0 });
        Ok(())
    }
}

/// Loss + gradients for one (mini)batch of on-policy samples.
#[allow(clippy::too_many_arguments)]
pub fn pg_loss(
    params: &ParamSet,
    ac_cfg: &AcConfig,
    cfg: &PgConfig,
    obs: &Tensor,
    actions: &[usize],
    old_log_probs: &[f64],
    adv: &[f64],
    ret: &[f64],
) -> Result<(f64, GradSet, f64)> {
    let n = actions.len();
    let (logits, values, cache) = ac_forward(params, ac_cfg, obs)?;
    let n_actions = ac_cfg.n_actions;
    let mut dlogits = Tensor::zeros(&[n, n_actions]);
    let mut dvalues = Tensor::zeros(&[n]);
    let mut loss = 0.0;
    let mut entropy_sum = 0.0;
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let row = logits.row(i);
        let lp = log_softmax(row);
        let p = softmax(row);
        let a = actions[i];
        let log_pi = lp[a];
        let entropy: f64 = -p.iter().zip(&lp).map(|(&pj, &lj)| if pj > 0.0 { pj * lj } else { 0.0 }).sum::<f64>();
        entropy_sum += entropy;

        // policy objective gradient w.r.t. log pi(a)
        let dobj_dlogpi = match cfg.variant {
            PgVariant::A2c => adv[i],
            PgVariant::Ppo => {
                let ratio = (log_pi - old_log_probs[i]).exp();
                let unclipped = ratio * adv[i];
                let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv[i];
                loss += -unclipped.min(clipped) * inv_n;
                if unclipped <= clipped {
                    ratio * adv[i]
                } else if (1.0 - cfg.clip_eps..=1.0 + cfg.clip_eps).contains(&ratio) {
                    ratio * adv[i]
                } else {
                    0.0
                }
            }
        };
        if cfg.variant == PgVariant::A2c {
            loss += -log_pi * adv[i] * inv_n;
        }
        // d(-obj)/dlogits = -dobj_dlogpi * (e_a - pi)
        for j in 0..n_actions {
            let indicator = if j == a { 1.0 } else { 0.0 };
            dlogits.row_mut(i)[j] += -dobj_dlogpi * (indicator - p[j]) * inv_n;
        }
        // value loss
        let verr = values.data()[i] - ret[i];
        loss += cfg.value_coef * verr * verr * inv_n;
        dvalues.data_mut()[i] += cfg.value_coef * 2.0 * verr * inv_n;
        // entropy bonus: loss -= c_e * mean(H)
        loss += -cfg.entropy_coef * entropy * inv_n;
        for j in 0..n_actions {
            // dH/dl_j = -p_j (log p_j + H)
            let dh = -p[j] * (lp[j] + entropy);
            dlogits.row_mut(i)[j] += -cfg.entropy_coef * dh * inv_n;
        }
    }
    let grads = ac_backward(params, ac_cfg, &cache, &dlogits, &dvalues);
    Ok((loss, grads, entropy_sum * inv_n))
}

impl Algorithm for PgAlgorithm {
    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn version(&self) -> u64 {
        self.updates
    }

    fn min_steps_learn(&self) -> usize {
        0
    }

    fn begin_batch(&mut self, batch: &SampleBatchOut) -> Result<()> {
        self.stage(batch)
    }

    fn next_update(&mut self) -> Result<Option<PendingUpdate>> {
        let staged = match &mut self.staged {
            Some(s) => s,
            None => return Ok(None),
        };
        if staged.cursor >= staged.plan.len() {
            self.staged = None;
            return Ok(None);
        }
        let idx = staged.plan[staged.cursor].clone();
        staged.cursor += 1;
        let obs_dim = staged.obs.shape()[1];
        let mut obs = Tensor::zeros(&[idx.len(), obs_dim]);
        let mut actions = Vec::with_capacity(idx.len());
        let mut old = Vec::with_capacity(idx.len());
        let mut adv = Vec::with_capacity(idx.len());
        let mut ret = Vec::with_capacity(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            obs.data_mut()[k * obs_dim..(k + 1) * obs_dim]
                .copy_from_slice(&staged.obs.data()[i * obs_dim..(i + 1) * obs_dim]);
            actions.push(staged.actions[i]);
            old.push(staged.old_log_probs[i]);
            adv.push(staged.adv[i]);
            ret.push(staged.ret[i]);
        }
        let (loss, grads, entropy) =
            pg_loss(&self.params, &self.ac_cfg, &self.cfg, &obs, &actions, &old, &adv, &ret)?;
        Ok(Some(PendingUpdate::new(grads, OptInfo {
            loss,
            grad_norm: 0.0,
            td_abs_mean: None,
            entropy: Some(entropy),
        })))
    }

    fn apply_update(&mut self, update: PendingUpdate, grads_override: Option<&GradSet>) -> Result<()> {
        let mut grads = match grads_override {
            Some(g) => g.clone(),
            None => update.grads,
        };
        let norm = grads.clip_norm(self.cfg.grad_clip);
        adam_update(&mut self.params, &grads, &mut self.adam)?;
        self.updates += 1;
        let mut info = update.info;
        info.grad_norm = norm;
        info.ensure_finite()
    }
}
