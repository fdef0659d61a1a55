//! Sequence replay for recurrent training: contiguous `[warmup + train]`
//! slices at offsets aligned to the recurrent-state storage period, plus an
//! n-step target extension, with the initial recurrent state stored
//! periodically to save memory.

use super::ring::ReplayRing;
use super::sumtree::SumTree;
use super::transition::{PrioritySpec, ReplayKey};
use crate::error::{Error, Result};
use crate::sarray::{StructArray, StructSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct SequenceSpec {
    /// Burn-in rows forwarded without loss.
    pub warmup_t: usize,
    /// Rows contributing to the loss.
    pub train_t: usize,
    /// Recurrent-state storage period; must divide the sampler batch_T.
    pub period_m: usize,
}

impl SequenceSpec {
    pub fn slice_len(&self) -> usize {
        self.warmup_t + self.train_t
    }
}

/// How a sequence's priority aggregates per-step TD errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrioritySegment {
    FirstHalf,
    SecondHalf,
    Full,
}

/// A sampled batch of sequences, time-major over the extended slice
/// `[warmup + train + n_ext]`.
pub struct SequenceBatch {
    pub k: usize,
    pub len_ext: usize,
    pub warmup_t: usize,
    pub train_t: usize,
    pub n_ext: usize,
    pub obs: Vec<f32>,         // [len_ext, k, obs_dim]
    pub obs_dim: usize,
    pub actions: Vec<i64>,     // [len_ext, k]
    pub rewards: Vec<f32>,     // [len_ext, k]
    pub done: Vec<bool>,       // [len_ext, k]
    pub timeouts: Vec<bool>,   // [len_ext, k]
    pub prev_actions: Vec<i64>,// [len_ext, k]
    pub prev_rewards: Vec<f32>,// [len_ext, k]
    pub init_state: Vec<f64>,  // [k, hidden]
    pub hidden_dim: usize,
    pub is_weights: Vec<f64>,
    pub keys: Vec<ReplayKey>,  // key.abs_t = sequence start
}

pub struct SequenceReplay {
    ring: ReplayRing,
    pub spec: SequenceSpec,
    pub gamma: f64,
    pub n_step: usize,
    /// Stored recurrent states at aligned offsets: `[capacity_t / m, B]`.
    states: Vec<f64>,
    hidden_dim: usize,
    priority: Option<SeqPriority>,
    last_matured: Option<u64>,
}

struct SeqPriority {
    spec: PrioritySpec,
    tree: SumTree,
    max_seen: f64,
    eta: f64,
    segment: PrioritySegment,
    /// Use recorded-q n-step TD errors for initial priorities instead of
    /// max-seen.
    td_initial: bool,
}

impl SequenceReplay {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        batch_spec: &StructSpec,
        capacity_t: usize,
        batch_b: usize,
        seq: SequenceSpec,
        gamma: f64,
        n_step: usize,
        priority: Option<(PrioritySpec, f64, PrioritySegment, bool)>,
    ) -> Result<Self> {
        if seq.period_m == 0 || capacity_t % seq.period_m != 0 {
            return Err(Error::InvalidConfig(
                "storage period must divide ring capacity".into(),
            ));
        }
        if seq.train_t == 0 {
            return Err(Error::InvalidConfig("train_t must be positive".into()));
        }
        let ring = ReplayRing::new(batch_spec, capacity_t, batch_b)?;
        let hidden_dim = match ring.leaves.h {
            Some(leaf) => ring.array().leaf(leaf).elem(),
            None => return Err(Error::Replay("batch spec missing `agent_info.h`".into())),
        };
        if ring.leaves.q.is_none() {
            return Err(Error::Replay("batch spec missing `agent_info.q`".into()));
        }
        let seq_slots = capacity_t / seq.period_m;
        let priority = priority.map(|(spec, eta, segment, td_initial)| SeqPriority {
            spec,
            tree: SumTree::new(seq_slots * batch_b),
            max_seen: 1.0,
            eta,
            segment,
            td_initial,
        });
        Ok(SequenceReplay {
            ring,
            spec: seq,
            gamma,
            n_step,
            states: vec![0.0; seq_slots * batch_b * hidden_dim],
            hidden_dim,
            priority,
            last_matured: None,
        })
    }

    pub fn ring(&self) -> &ReplayRing {
        &self.ring
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn len_ext(&self) -> usize {
        self.spec.slice_len() + self.n_step
    }

    fn seq_slots(&self) -> usize {
        self.ring.capacity_t / self.spec.period_m
    }

    fn state_index(&self, t0: u64, b: usize) -> usize {
        let slot = ((t0 / self.spec.period_m as u64) as usize) % self.seq_slots();
        (slot * self.ring.batch_b + b) * self.hidden_dim
    }

    fn tree_leaf(&self, t0: u64, b: usize) -> usize {
        let slot = ((t0 / self.spec.period_m as u64) as usize) % self.seq_slots();
        slot * self.ring.batch_b + b
    }

    /// Aligned start offsets currently valid for sampling.
    fn valid_starts(&self) -> Option<(u64, u64)> {
        let need = self.len_ext() as u64;
        if self.ring.t_total() < need {
            return None;
        }
        let m = self.spec.period_m as u64;
        let hi_raw = self.ring.t_total() - need;
        let hi = (hi_raw / m) * m;
        let lo = self.ring.oldest().div_ceil(m) * m;
        if lo > hi {
            None
        } else {
            Some((lo, hi))
        }
    }

    pub fn len_valid(&self) -> usize {
        match self.valid_starts() {
            None => 0,
            Some((lo, hi)) => {
                let m = self.spec.period_m as u64;
                (((hi - lo) / m + 1) as usize) * self.ring.batch_b
            }
        }
    }

    pub fn append_batch(&mut self, batch: &StructArray) -> Result<()> {
        let rows = batch.leading()[0];
        if rows % self.spec.period_m != 0 {
            return Err(Error::InvalidConfig(
                "storage period must divide the sampler batch_T".into(),
            ));
        }
        if rows + self.len_ext() > self.ring.capacity_t {
            return Err(Error::Replay("batch plus sequence window exceeds capacity".into()));
        }
        let start = self.ring.append(batch)?;
        // store recurrent state at aligned rows
        let m = self.spec.period_m as u64;
        let mut h_buf = vec![0.0f32; self.hidden_dim];
        for t in start..start + rows as u64 {
            if t % m == 0 {
                for b in 0..self.ring.batch_b {
                    self.ring.h_into(t, b, &mut h_buf);
                    let at = self.state_index(t, b);
                    for (j, &v) in h_buf.iter().enumerate() {
                        self.states[at + j] = v as f64;
                    }
                }
            }
        }
        self.refresh_priorities(start, rows);
        Ok(())
    }

    fn refresh_priorities(&mut self, start: u64, rows: usize) {
        if self.priority.is_none() {
            return;
        }
        let m = self.spec.period_m as u64;
        // invalidate starts mapping to slots being overwritten
        let overwrite_from = start;
        let overwrite_to = start + rows as u64;
        let mut invalid = Vec::new();
        {
            let mut t0 = (overwrite_from / m) * m;
            if t0 < overwrite_from {
                t0 += m;
            }
            while t0 < overwrite_to {
                invalid.push(t0);
                t0 += m;
            }
        }
        for t0 in invalid {
            for b in 0..self.ring.batch_b {
                let leaf = self.tree_leaf(t0, b);
                self.priority.as_mut().unwrap().tree.update(leaf, 0.0);
            }
        }
        // mature starts whose full extended window now exists
        let need = self.len_ext() as u64;
        if self.ring.t_total() < need {
            return;
        }
        let hi = ((self.ring.t_total() - need) / m) * m;
        let mut t0 = match self.last_matured {
            None => self.ring.oldest().div_ceil(m) * m,
            Some(prev) => prev + m,
        };
        while t0 <= hi {
            for b in 0..self.ring.batch_b {
                let p = self.initial_priority(t0, b);
                let leaf = self.tree_leaf(t0, b);
                self.priority.as_mut().unwrap().tree.update(leaf, p);
            }
            self.last_matured = Some(t0);
            t0 += m;
        }
    }

    /// Initial priority for a newly matured sequence start.
    fn initial_priority(&self, t0: u64, b: usize) -> f64 {
        let ps = self.priority.as_ref().unwrap();
        if !ps.td_initial {
            return (ps.max_seen + ps.spec.floor).powf(ps.spec.alpha);
        }
        // n-step TD errors from the q values recorded at sampling time
        let n_actions = self.ring.array().leaf(self.ring.leaves.q.unwrap()).elem();
        let mut q_t = vec![0.0f32; n_actions];
        let mut q_n = vec![0.0f32; n_actions];
        let (lo_t, hi_t) = self.train_range(t0);
        let mut deltas = Vec::with_capacity((hi_t - lo_t) as usize);
        for t in lo_t..hi_t {
            let nsr = super::ring::compute_n_step_return(&self.ring, t, b, self.gamma, self.n_step);
            self.ring.q_into(t, b, &mut q_t);
            let a = self.ring.action_i64(t, b) as usize;
            let bootstrap = if nsr.done_n {
                0.0
            } else {
                self.ring.q_into(nsr.t_next, b, &mut q_n);
                q_n.iter().cloned().fold(f32::MIN, f32::max) as f64
            };
            let target = nsr.return_n + nsr.gamma_n * bootstrap;
            deltas.push((target - q_t[a.min(n_actions - 1)] as f64).abs());
        }
        aggregate_priority(&deltas, ps.eta, ps.spec.floor, ps.spec.alpha)
    }

    /// Absolute range of train-segment rows used for priorities.
    fn train_range(&self, t0: u64) -> (u64, u64) {
        let ps = self.priority.as_ref().unwrap();
        let start = t0 + self.spec.warmup_t as u64;
        let train = self.spec.train_t as u64;
        match ps.segment {
            PrioritySegment::Full => (start, start + train),
            PrioritySegment::FirstHalf => (start, start + train.div_ceil(2)),
            PrioritySegment::SecondHalf => (start + train / 2, start + train),
        }
    }

    pub fn sample_sequences(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<SequenceBatch> {
        let keys: Vec<ReplayKey> = if let Some(ps) = &self.priority {
            let total = ps.tree.total();
            if total <= 0.0 {
                return Err(Error::Replay("insufficient fill for sequences".into()));
            }
            let seg = total / batch_size as f64;
            let mut keys = Vec::with_capacity(batch_size);
            for j in 0..batch_size {
                let u: f64 = rng.gen();
                let prefix = ((j as f64 + u) * seg).min(total * (1.0 - 1e-12));
                let leaf = ps.tree.find(prefix)?;
                keys.push(self.leaf_to_key(leaf));
            }
            keys
        } else {
            let (lo, hi) = self
                .valid_starts()
                .ok_or_else(|| Error::Replay("insufficient fill for sequences".into()))?;
            let m = self.spec.period_m as u64;
            let count = (hi - lo) / m + 1;
            (0..batch_size)
                .map(|_| {
                    let pick = rng.gen_range(0..count);
                    let b = rng.gen_range(0..self.ring.batch_b);
                    ReplayKey { abs_t: lo + pick * m, b }
                })
                .collect()
        };
        let weights = match &self.priority {
            None => vec![1.0; batch_size],
            Some(ps) => {
                let total = ps.tree.total();
                let n_valid = self.len_valid().max(1);
                let mut ws: Vec<f64> = keys
                    .iter()
                    .map(|k| {
                        let p = ps.tree.get(self.tree_leaf_inner(k.abs_t, k.b));
                        (n_valid as f64 * (p / total)).powf(-ps.spec.beta)
                    })
                    .collect();
                let w_max = ws.iter().cloned().fold(f64::MIN, f64::max).max(1e-300);
                ws.iter_mut().for_each(|w| *w /= w_max);
                ws
            }
        };
        Ok(self.gather(&keys, weights))
    }

    fn tree_leaf_inner(&self, t0: u64, b: usize) -> usize {
        let slot = ((t0 / self.spec.period_m as u64) as usize) % (self.ring.capacity_t / self.spec.period_m);
        slot * self.ring.batch_b + b
    }

    fn leaf_to_key(&self, leaf: usize) -> ReplayKey {
        let b = leaf % self.ring.batch_b;
        let slot = leaf / self.ring.batch_b;
        // map the sequence slot back to the latest aligned start below t_total
        let m = self.spec.period_m as u64;
        let seq_slots = self.seq_slots() as u64;
        let total_seqs = self.ring.t_total() / m; // count of aligned offsets written
        let cursor = total_seqs % seq_slots;
        let mut seq_idx = total_seqs - cursor + slot as u64;
        if slot as u64 >= cursor {
            seq_idx = seq_idx.saturating_sub(seq_slots);
        }
        ReplayKey { abs_t: seq_idx * m, b }
    }

    fn gather(&self, keys: &[ReplayKey], is_weights: Vec<f64>) -> SequenceBatch {
        let k = keys.len();
        let len_ext = self.len_ext();
        let obs_dim = self.ring.obs_dim();
        let mut batch = SequenceBatch {
            k,
            len_ext,
            warmup_t: self.spec.warmup_t,
            train_t: self.spec.train_t,
            n_ext: self.n_step,
            obs: vec![0.0; len_ext * k * obs_dim],
            obs_dim,
            actions: vec![0; len_ext * k],
            rewards: vec![0.0; len_ext * k],
            done: vec![false; len_ext * k],
            timeouts: vec![false; len_ext * k],
            prev_actions: vec![0; len_ext * k],
            prev_rewards: vec![0.0; len_ext * k],
            init_state: vec![0.0; k * self.hidden_dim],
            hidden_dim: self.hidden_dim,
            is_weights,
            keys: keys.to_vec(),
        };
        let mut obs_buf = vec![0.0f32; obs_dim];
        for (i, key) in keys.iter().enumerate() {
            let at = self.state_index(key.abs_t, key.b);
            batch.init_state[i * self.hidden_dim..(i + 1) * self.hidden_dim]
                .copy_from_slice(&self.states[at..at + self.hidden_dim]);
            for step in 0..len_ext {
                let t = key.abs_t + step as u64;
                let idx = step * k + i;
                self.ring.obs_into(t, key.b, &mut obs_buf);
                batch.obs[idx * obs_dim..(idx + 1) * obs_dim]
                    .copy_from_slice(&obs_buf);
                batch.actions[idx] = self.ring.action_i64(t, key.b);
                batch.rewards[idx] = self.ring.reward(t, key.b);
                batch.done[idx] = self.ring.done(t, key.b);
                batch.timeouts[idx] = self.ring.timeout(t, key.b);
                batch.prev_actions[idx] = self.ring.prev_action_i64(t, key.b);
                batch.prev_rewards[idx] = self.ring.prev_reward(t, key.b);
            }
        }
        batch
    }

    /// Aggregate per-step TD magnitudes into sequence priorities.
    pub fn update_priorities(&mut self, keys: &[ReplayKey], per_seq_deltas: &[Vec<f64>]) {
        let eta;
        let floor;
        let alpha;
        match &self.priority {
            Some(ps) => {
                eta = ps.eta;
                floor = ps.spec.floor;
                alpha = ps.spec.alpha;
            }
            None => return,
        }
        let valid = self.valid_starts();
        for (key, deltas) in keys.iter().zip(per_seq_deltas) {
            if let Some((lo, hi)) = valid {
                if key.abs_t < lo || key.abs_t > hi {
                    continue;
                }
            } else {
                continue;
            }
            let p = aggregate_priority(deltas, eta, floor, alpha);
            let leaf = self.tree_leaf_inner(key.abs_t, key.b);
            let ps = self.priority.as_mut().unwrap();
            ps.max_seen = ps.max_seen.max(deltas.iter().cloned().fold(0.0, f64::max));
            ps.tree.update(leaf, p);
        }
    }

    /// Per-step TD indices (absolute) the priority aggregation should use.
    pub fn priority_rows(&self, t0: u64) -> (u64, u64) {
        match &self.priority {
            Some(_) => self.train_range(t0),
            None => {
                let start = t0 + self.spec.warmup_t as u64;
                (start, start + self.spec.train_t as u64)
            }
        }
    }
}

/// Mixture max/mean aggregation with floor and exponent.
fn aggregate_priority(deltas: &[f64], eta: f64, floor: f64, alpha: f64) -> f64 {
    if deltas.is_empty() {
        return floor.powf(alpha);
    }
    let max = deltas.iter().cloned().fold(0.0, f64::max);
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    (eta * max + (1.0 - eta) * mean + floor).powf(alpha)
}
