//! Ring storage over `[capacity_T, B]` sample rows, shared by the replay
//! buffer variants, with n-step return computation against stored columns.

use crate::error::{Error, Result};
use crate::sarray::{Backing, DimSel, IndexExpr, StructArray, StructSpec};

/// Cached leaf indices for the standard sample-batch fields.
#[derive(Clone, Debug)]
pub struct RingLeaves {
    pub obs: usize,
    pub action: usize,
    pub reward: usize,
    pub done: usize,
    pub timeout: Option<usize>,
    pub prev_action: usize,
    pub prev_reward: usize,
    pub q: Option<usize>,
    pub h: Option<usize>,
}

impl RingLeaves {
    pub fn from_spec(spec: &StructSpec) -> Result<Self> {
        let need = |path: &str| {
            spec.leaf_index(path)
                .ok_or_else(|| Error::Replay(format!("batch spec missing `{path}`")))
        };
        Ok(RingLeaves {
            obs: need("observation")?,
            action: need("action")?,
            reward: need("reward")?,
            done: need("done")?,
            timeout: spec.leaf_index("env_info.timeout"),
            prev_action: need("prev_action")?,
            prev_reward: need("prev_reward")?,
            q: spec.leaf_index("agent_info.q"),
            h: spec.leaf_index("agent_info.h"),
        })
    }
}

pub struct ReplayRing {
    arr: StructArray,
    pub capacity_t: usize,
    pub batch_b: usize,
    t_total: u64,
    pub leaves: RingLeaves,
}

impl ReplayRing {
    pub fn new(batch_spec: &StructSpec, capacity_t: usize, batch_b: usize) -> Result<Self> {
        let arr = StructArray::allocate(batch_spec, &[capacity_t, batch_b], Backing::Private)?;
        let leaves = RingLeaves::from_spec(batch_spec)?;
        Ok(ReplayRing { arr, capacity_t, batch_b, t_total: 0, leaves })
    }

    pub fn spec(&self) -> &StructSpec {
        self.arr.spec()
    }

    pub fn array(&self) -> &StructArray {
        &self.arr
    }

    /// Absolute time of the next row to be written (== rows appended).
    pub fn t_total(&self) -> u64 {
        self.t_total
    }

    pub fn filled(&self) -> usize {
        (self.t_total as usize).min(self.capacity_t)
    }

    pub fn oldest(&self) -> u64 {
        self.t_total.saturating_sub(self.capacity_t as u64)
    }

    /// Absolute time of the newest written row; only valid when non-empty.
    pub fn newest(&self) -> u64 {
        debug_assert!(self.t_total > 0);
        self.t_total - 1
    }

    pub fn slot(&self, abs_t: u64) -> usize {
        (abs_t % self.capacity_t as u64) as usize
    }

    fn cell(&self, abs_t: u64, b: usize) -> usize {
        self.slot(abs_t) * self.batch_b + b
    }

    /// Append `[T, B]` rows at the cursor, wrapping as needed. Returns the
    /// absolute time of the first appended row.
    pub fn append(&mut self, batch: &StructArray) -> Result<u64> {
        if batch.spec() != self.arr.spec() {
            return Err(Error::StructureMismatch("batch spec differs from ring spec".into()));
        }
        let dims = batch.leading();
        if dims.len() != 2 || dims[1] != self.batch_b {
            return Err(Error::ShapeMismatch(format!(
                "batch leading {dims:?} does not match ring B={}",
                self.batch_b
            )));
        }
        let rows = dims[0];
        if rows > self.capacity_t {
            return Err(Error::Replay("batch longer than ring capacity".into()));
        }
        let start_abs = self.t_total;
        let cursor = self.slot(start_abs);
        let first = rows.min(self.capacity_t - cursor);
        StructArray::copy_region(
            &mut self.arr,
            &IndexExpr(vec![DimSel::Range(cursor, cursor + first)]),
            batch,
            &IndexExpr(vec![DimSel::Range(0, first)]),
        )?;
        if first < rows {
            StructArray::copy_region(
                &mut self.arr,
                &IndexExpr(vec![DimSel::Range(0, rows - first)]),
                batch,
                &IndexExpr(vec![DimSel::Range(first, rows)]),
            )?;
        }
        self.t_total += rows as u64;
        Ok(start_abs)
    }

    pub fn reward(&self, abs_t: u64, b: usize) -> f32 {
        self.arr.get_f32(self.leaves.reward, self.cell(abs_t, b))
    }

    pub fn done(&self, abs_t: u64, b: usize) -> bool {
        self.arr.get_bool(self.leaves.done, self.cell(abs_t, b))
    }

    pub fn timeout(&self, abs_t: u64, b: usize) -> bool {
        match self.leaves.timeout {
            Some(leaf) => self.arr.get_bool(leaf, self.cell(abs_t, b)),
            None => false,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.arr.leaf(self.leaves.obs).elem()
    }

    pub fn obs_into(&self, abs_t: u64, b: usize, out: &mut [f32]) {
        self.arr.cell_f32(self.leaves.obs, self.cell(abs_t, b), out);
    }

    pub fn action_i64(&self, abs_t: u64, b: usize) -> i64 {
        self.arr.get_i64(self.leaves.action, self.cell(abs_t, b))
    }

    pub fn action_dim(&self) -> usize {
        self.arr.leaf(self.leaves.action).elem()
    }

    pub fn action_f32_into(&self, abs_t: u64, b: usize, out: &mut [f32]) {
        self.arr.cell_f32(self.leaves.action, self.cell(abs_t, b), out);
    }

    pub fn prev_action_i64(&self, abs_t: u64, b: usize) -> i64 {
        self.arr.get_i64(self.leaves.prev_action, self.cell(abs_t, b))
    }

    pub fn prev_reward(&self, abs_t: u64, b: usize) -> f32 {
        self.arr.get_f32(self.leaves.prev_reward, self.cell(abs_t, b))
    }

    pub fn q_into(&self, abs_t: u64, b: usize, out: &mut [f32]) {
        let leaf = self.leaves.q.expect("ring has no recorded q column");
        self.arr.cell_f32(leaf, self.cell(abs_t, b), out);
    }

    pub fn h_into(&self, abs_t: u64, b: usize, out: &mut [f32]) {
        let leaf = self.leaves.h.expect("ring has no recorded state column");
        self.arr.cell_f32(leaf, self.cell(abs_t, b), out);
    }

    /// Debug snapshot in the structured dump format.
    pub fn dump_snapshot<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        crate::sarray::dump(&self.arr, w)
    }

}

/// n-step discounted return starting at `(abs_t, b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NStepReturn {
    pub return_n: f64,
    /// True when a real (non-timeout) termination occurred inside the
    /// window; no bootstrap beyond it.
    pub done_n: bool,
    /// Discount applied to the bootstrap value (`gamma^k` with `k` the
    /// steps actually accumulated).
    pub gamma_n: f64,
    /// Absolute time of the bootstrap observation when `done_n` is false.
    pub t_next: u64,
}

/// `return_n = sum_i gamma^i r_{t+i}`, truncated at the first done.
/// Timeout-flagged terminations stop accumulation but still bootstrap.
pub fn compute_n_step_return(ring: &ReplayRing, abs_t: u64, b: usize, gamma: f64, n: usize) -> NStepReturn {
    debug_assert!(abs_t >= ring.oldest());
    // the bootstrap row at t+n must already be written
    debug_assert!(abs_t + n as u64 <= ring.newest());
    let mut acc = 0.0f64;
    let mut discount = 1.0f64;
    for i in 0..n {
        let t = abs_t + i as u64;
        acc += discount * ring.reward(t, b) as f64;
        discount *= gamma;
        if ring.done(t, b) {
            let timeout = ring.timeout(t, b);
            return NStepReturn {
                return_n: acc,
                done_n: !timeout,
                gamma_n: discount,
                t_next: t + 1,
            };
        }
    }
    NStepReturn { return_n: acc, done_n: false, gamma_n: discount, t_next: abs_t + n as u64 }
}
