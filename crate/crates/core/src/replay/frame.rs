//! Frame-dedup observation store: keeps single frames and reconstructs
//! k-frame stacks on demand, padding episode starts with the first frame.

use crate::error::{Error, Result};

pub struct FrameStore {
    /// Physical rows: capacity_t + k - 1 so the oldest logical row can
    /// still look back k-1 frames.
    phys_rows: usize,
    capacity_t: usize,
    batch_b: usize,
    frame_dim: usize,
    stack_k: usize,
    frames: Vec<f32>,      // [phys_rows, B, frame_dim]
    started: Vec<bool>,    // [phys_rows, B]: row begins a new episode
    t_total: u64,
}

impl FrameStore {
    pub fn new(capacity_t: usize, batch_b: usize, frame_dim: usize, stack_k: usize) -> Self {
        assert!(stack_k >= 1 && capacity_t >= 1);
        let phys_rows = capacity_t + stack_k - 1;
        FrameStore {
            phys_rows,
            capacity_t,
            batch_b,
            frame_dim,
            stack_k,
            frames: vec![0.0; phys_rows * batch_b * frame_dim],
            started: vec![false; phys_rows * batch_b],
            t_total: 0,
        }
    }

    /// Physical frame slots held per column (vs `capacity_t * stack_k` for
    /// a naive full-stack buffer).
    pub fn frame_slots(&self) -> usize {
        self.phys_rows
    }

    pub fn t_total(&self) -> u64 {
        self.t_total
    }

    fn slot(&self, abs_t: u64) -> usize {
        (abs_t % self.phys_rows as u64) as usize
    }

    /// Append one row of unique frames; `started[b]` marks columns whose
    /// frame begins a new episode.
    pub fn append_row(&mut self, frames: &[f32], started: &[bool]) -> Result<()> {
        if frames.len() != self.batch_b * self.frame_dim || started.len() != self.batch_b {
            return Err(Error::ShapeMismatch("frame row size".into()));
        }
        let slot = self.slot(self.t_total);
        for b in 0..self.batch_b {
            let dst = (slot * self.batch_b + b) * self.frame_dim;
            self.frames[dst..dst + self.frame_dim]
                .copy_from_slice(&frames[b * self.frame_dim..(b + 1) * self.frame_dim]);
            self.started[slot * self.batch_b + b] = started[b];
        }
        self.t_total += 1;
        Ok(())
    }

    /// Oldest absolute row that can still be reconstructed.
    pub fn oldest_valid(&self) -> u64 {
        self.t_total.saturating_sub(self.capacity_t as u64)
    }

    /// Reconstruct the k-stacked observation at `(abs_t, b)`: frames
    /// `t-k+1..=t`, padding before the episode start with its first frame.
    pub fn reconstruct(&self, abs_t: u64, b: usize) -> Result<Vec<f32>> {
        if self.t_total == 0 || abs_t >= self.t_total || abs_t < self.oldest_valid() {
            return Err(Error::Replay(format!("frame row {abs_t} out of window")));
        }
        let mut indices = vec![abs_t; self.stack_k];
        for j in (0..self.stack_k - 1).rev() {
            let cur = indices[j + 1];
            let cur_slot = self.slot(cur);
            let at_episode_start = self.started[cur_slot * self.batch_b + b];
            indices[j] = if at_episode_start || cur == 0 { cur } else { cur - 1 };
        }
        let mut out = Vec::with_capacity(self.stack_k * self.frame_dim);
        for &t in &indices {
            let slot = self.slot(t);
            let src = (slot * self.batch_b + b) * self.frame_dim;
            out.extend_from_slice(&self.frames[src..src + self.frame_dim]);
        }
        Ok(out)
    }
}
