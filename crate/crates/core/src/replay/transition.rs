//! Uniform and prioritized n-step transition replay.

use super::ring::{compute_n_step_return, ReplayRing};
use super::sumtree::SumTree;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::sarray::{ElemKind, StructArray, StructSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Identifies a stored transition for later priority updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayKey {
    pub abs_t: u64,
    pub b: usize,
}

/// Actions of a sampled batch, in storage form.
#[derive(Clone, Debug)]
pub enum ActionBatch {
    Discrete(Vec<i64>),
    Continuous(Tensor),
}

/// A sampled batch of n-step transitions in training precision.
pub struct TransitionBatch {
    pub obs: Tensor,     // [k, obs_dim]
    pub next_obs: Tensor,
    pub actions: ActionBatch,
    pub return_n: Vec<f64>,
    pub done_n: Vec<f64>, // 0/1
    pub gamma_n: Vec<f64>,
    pub is_weights: Vec<f64>,
    pub keys: Vec<ReplayKey>,
}

/// Priority configuration for prioritized replay.
#[derive(Clone, Debug)]
pub struct PrioritySpec {
    pub alpha: f64,
    pub beta: f64,
    /// Linear anneal of beta toward 1.0 over this many consumed samples
    /// (0 keeps beta constant).
    pub beta_anneal_steps: usize,
    pub floor: f64,
}

impl Default for PrioritySpec {
    fn default() -> Self {
        PrioritySpec { alpha: 0.6, beta: 0.4, beta_anneal_steps: 0, floor: 1e-3 }
    }
}

pub struct NStepReplay {
    ring: ReplayRing,
    pub gamma: f64,
    pub n_step: usize,
    priority: Option<PriorityState>,
}

struct PriorityState {
    spec: PrioritySpec,
    tree: SumTree,
    /// Largest raw |delta| seen; the default priority for new samples.
    max_seen: f64,
}

impl NStepReplay {
    pub fn new(
        batch_spec: &StructSpec,
        capacity_t: usize,
        batch_b: usize,
        gamma: f64,
        n_step: usize,
        priority: Option<PrioritySpec>,
    ) -> Result<Self> {
        if n_step == 0 {
            return Err(Error::InvalidConfig("n_step must be at least 1".into()));
        }
        if capacity_t <= n_step {
            return Err(Error::InvalidConfig("capacity must exceed n_step".into()));
        }
        let ring = ReplayRing::new(batch_spec, capacity_t, batch_b)?;
        let priority = priority.map(|spec| PriorityState {
            spec,
            tree: SumTree::new(capacity_t * batch_b),
            max_seen: 1.0,
        });
        Ok(NStepReplay { ring, gamma, n_step, priority })
    }

    pub fn priority_spec(&self) -> Option<&PrioritySpec> {
        self.priority.as_ref().map(|p| &p.spec)
    }

    pub fn ring(&self) -> &ReplayRing {
        &self.ring
    }

    /// Rows appended so far (environment steps stored).
    pub fn steps_stored(&self) -> u64 {
        self.ring.t_total() * self.ring.batch_b as u64
    }

    /// Oldest and newest valid (sampleable) absolute times, if any.
    fn valid_range(&self) -> Option<(u64, u64)> {
        if self.ring.t_total() <= self.n_step as u64 {
            return None;
        }
        let hi = self.ring.newest() - self.n_step as u64;
        let lo = self.ring.oldest();
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    pub fn len_valid(&self) -> usize {
        match self.valid_range() {
            None => 0,
            Some((lo, hi)) => ((hi - lo + 1) as usize) * self.ring.batch_b,
        }
    }

    pub fn append_batch(&mut self, batch: &StructArray) -> Result<()> {
        let rows = batch.leading()[0];
        if rows + self.n_step > self.ring.capacity_t {
            return Err(Error::Replay("batch plus lookahead exceeds ring capacity".into()));
        }
        let start = self.ring.append(batch)?;
        if let Some(ps) = &mut self.priority {
            let b = self.ring.batch_b;
            let w = self.n_step as u64;
            // freshly written rows (and the old rows they overwrote) become
            // unsampleable
            for t in start..start + rows as u64 {
                let slot = self.ring.slot(t);
                for col in 0..b {
                    ps.tree.update(slot * b + col, 0.0);
                }
            }
            // rows whose n-step lookahead is now complete get their default
            // priority; each row matures exactly once
            if self.ring.t_total() > w {
                let new_hi = self.ring.t_total() - w - 1;
                let from = start.saturating_sub(w).max(self.ring.oldest());
                let default = (ps.max_seen + ps.spec.floor).powf(ps.spec.alpha);
                for t in from..=new_hi {
                    let slot = self.ring.slot(t);
                    for col in 0..b {
                        ps.tree.update(slot * b + col, default);
                    }
                }
            }
        }
        Ok(())
    }

    fn gather(&self, keys: &[ReplayKey], is_weights: Vec<f64>) -> TransitionBatch {
        let k = keys.len();
        let obs_dim = self.ring.obs_dim();
        let mut obs = Tensor::zeros(&[k, obs_dim]);
        let mut next_obs = Tensor::zeros(&[k, obs_dim]);
        let mut return_n = Vec::with_capacity(k);
        let mut done_n = Vec::with_capacity(k);
        let mut gamma_n = Vec::with_capacity(k);
        let discrete = self.ring.array().leaf(self.ring.leaves.action).kind() == ElemKind::I64;
        let act_dim = self.ring.action_dim();
        let mut acts_i = Vec::new();
        let mut acts_c = Tensor::zeros(&[k, act_dim]);
        let mut buf = vec![0.0f32; obs_dim];
        let mut abuf = vec![0.0f32; act_dim];
        for (i, key) in keys.iter().enumerate() {
            self.ring.obs_into(key.abs_t, key.b, &mut buf);
            for (d, &v) in buf.iter().enumerate() {
                obs.data_mut()[i * obs_dim + d] = v as f64;
            }
            let nsr = compute_n_step_return(&self.ring, key.abs_t, key.b, self.gamma, self.n_step);
            self.ring.obs_into(nsr.t_next.min(self.ring.newest()), key.b, &mut buf);
            for (d, &v) in buf.iter().enumerate() {
                next_obs.data_mut()[i * obs_dim + d] = v as f64;
            }
            return_n.push(nsr.return_n);
            done_n.push(if nsr.done_n { 1.0 } else { 0.0 });
            gamma_n.push(nsr.gamma_n);
            if discrete {
                acts_i.push(self.ring.action_i64(key.abs_t, key.b));
            } else {
                self.ring.action_f32_into(key.abs_t, key.b, &mut abuf);
                for (d, &v) in abuf.iter().enumerate() {
                    acts_c.data_mut()[i * act_dim + d] = v as f64;
                }
            }
        }
        TransitionBatch {
            obs,
            next_obs,
            actions: if discrete { ActionBatch::Discrete(acts_i) } else { ActionBatch::Continuous(acts_c) },
            return_n,
            done_n,
            gamma_n,
            is_weights,
            keys: keys.to_vec(),
        }
    }

    /// Uniform sampling over valid transitions (with replacement). The rng
    /// is caller-owned so sampling is a read-side operation.
    pub fn sample_uniform(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<TransitionBatch> {
        let (lo, hi) = self.valid_range().ok_or_else(|| Error::Replay("buffer too small".into()))?;
        let b = self.ring.batch_b;
        let keys: Vec<ReplayKey> = (0..batch_size)
            .map(|_| {
                let abs_t = rng.gen_range(lo..=hi);
                let col = rng.gen_range(0..b);
                ReplayKey { abs_t, b: col }
            })
            .collect();
        Ok(self.gather(&keys, vec![1.0; batch_size]))
    }

    /// Prioritized sampling by stratified prefix draws over the sum tree,
    /// with max-normalized importance weights. `beta` overrides the
    /// configured exponent (for annealing, tracked by the caller).
    pub fn sample_prioritized(
        &self,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
        beta_override: Option<f64>,
    ) -> Result<TransitionBatch> {
        let ps = self.priority.as_ref().ok_or_else(|| Error::Replay("not prioritized".into()))?;
        let total = ps.tree.total();
        if total <= 0.0 {
            return Err(Error::Replay("empty prioritized buffer".into()));
        }
        let n_valid = {
            // recompute without borrowing self mutably twice
            let t_total = self.ring.t_total();
            if t_total <= self.n_step as u64 {
                0
            } else {
                let hi = t_total - 1 - self.n_step as u64;
                let lo = self.ring.oldest();
                if lo > hi { 0 } else { ((hi - lo + 1) as usize) * self.ring.batch_b }
            }
        };
        if n_valid == 0 {
            return Err(Error::Replay("buffer too small".into()));
        }
        let beta = beta_override.unwrap_or(ps.spec.beta);
        let b = self.ring.batch_b;
        let seg = total / batch_size as f64;
        let mut keys = Vec::with_capacity(batch_size);
        let mut weights = Vec::with_capacity(batch_size);
        for j in 0..batch_size {
            let u: f64 = rng.gen();
            let prefix = (j as f64 + u) * seg;
            let leaf = ps.tree.find(prefix.min(total * (1.0 - 1e-12)))?;
            let slot_t = leaf / b;
            let col = leaf % b;
            // map the ring slot back to absolute time (the latest row below
            // t_total occupying that slot)
            let t_total = self.ring.t_total() as i64;
            let cap = self.ring.capacity_t as i64;
            let cursor = t_total % cap;
            let mut abs = t_total - cursor + slot_t as i64;
            if slot_t as i64 >= cursor {
                abs -= cap;
            }
            debug_assert!(abs >= 0, "sampled a never-written slot");
            let abs_t = abs as u64;
            let p_leaf = ps.tree.get(leaf);
            let prob = p_leaf / total;
            weights.push((n_valid as f64 * prob).powf(-beta));
            keys.push(ReplayKey { abs_t, b: col });
        }
        let w_max = weights.iter().cloned().fold(f64::MIN, f64::max).max(1e-300);
        let weights: Vec<f64> = weights.into_iter().map(|w| w / w_max).collect();
        Ok(self.gather(&keys, weights))
    }

    /// Write back new priorities; duplicates resolve last-write-wins. Keys
    /// that have been overwritten or fell out of the valid window are
    /// ignored.
    pub fn update_priorities(&mut self, keys: &[ReplayKey], td_abs: &[f64]) {
        let (lo, hi) = match self.valid_range() {
            Some(r) => r,
            None => return,
        };
        let b = self.ring.batch_b;
        if let Some(ps) = &mut self.priority {
            for (key, &delta) in keys.iter().zip(td_abs) {
                if key.abs_t < lo || key.abs_t > hi {
                    continue;
                }
                ps.max_seen = ps.max_seen.max(delta);
                let slot = (key.abs_t % self.ring.capacity_t as u64) as usize;
                let p = (delta + ps.spec.floor).powf(ps.spec.alpha);
                ps.tree.update(slot * b + key.b, p);
            }
        }
    }

    pub fn tree_total(&self) -> f64 {
        self.priority.as_ref().map(|p| p.tree.total()).unwrap_or(0.0)
    }

    pub fn tree_node_sum_error(&self) -> f64 {
        self.priority.as_ref().map(|p| p.tree.node_sum_error()).unwrap_or(0.0)
    }

    /// Raw tree priority of one key (diagnostics/tests).
    pub fn priority_of(&self, key: &ReplayKey) -> f64 {
        match &self.priority {
            Some(ps) => {
                let slot = (key.abs_t % self.ring.capacity_t as u64) as usize;
                ps.tree.get(slot * self.ring.batch_b + key.b)
            }
            None => 0.0,
        }
    }

    /// True when the key lies in the cursor exclusion window (not
    /// sampleable).
    pub fn in_exclusion_window(&self, key: &ReplayKey) -> bool {
        match self.valid_range() {
            None => true,
            Some((lo, hi)) => key.abs_t < lo || key.abs_t > hi,
        }
    }
}
