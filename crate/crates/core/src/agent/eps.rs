//! Epsilon-greedy action selection with scalar annealing or fixed per-slot
//! epsilon vectors.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct EpsilonSpec {
    pub initial: f64,
    pub final_: f64,
    pub anneal_steps: usize,
    pub eval_eps: f64,
    /// Fixed epsilon per slot, `eps_i = base^(1 + span·i/(B-1))`.
    pub per_slot_vector: bool,
    pub vector_base: f64,
    pub vector_span: f64,
}

impl Default for EpsilonSpec {
    fn default() -> Self {
        EpsilonSpec {
            initial: 1.0,
            final_: 0.05,
            anneal_steps: 10_000,
            eval_eps: 0.0,
            per_slot_vector: false,
            vector_base: 0.4,
            vector_span: 7.0,
        }
    }
}

impl EpsilonSpec {
    /// Epsilon for a slot at a global env-step count.
    pub fn eps(&self, slot: usize, batch_b: usize, cum_env_steps: usize, eval: bool) -> f64 {
        if eval {
            return self.eval_eps;
        }
        if self.per_slot_vector {
            if batch_b <= 1 {
                return self.vector_base;
            }
            let frac = slot as f64 / (batch_b - 1) as f64;
            return self.vector_base.powf(1.0 + self.vector_span * frac);
        }
        if self.anneal_steps == 0 || cum_env_steps >= self.anneal_steps {
            return self.final_;
        }
        let frac = cum_env_steps as f64 / self.anneal_steps as f64;
        self.initial + (self.final_ - self.initial) * frac
    }
}

/// Greedy index with ties broken to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

/// With probability `eps` a uniform action, otherwise the greedy one. Draws
/// come only from the given slot stream.
pub fn epsilon_greedy(q: &[f64], eps: f64, rng: &mut ChaCha8Rng) -> usize {
    if eps > 0.0 && rng.gen::<f64>() < eps {
        rng.gen_range(0..q.len())
    } else {
        argmax(q)
    }
}
