//! One-dimensional point navigation with per-step distance cost.

use super::{Action, Env, EnvInfo, EnvStep, InfoValue, Space};
use crate::error::Result;
use crate::sarray::StructSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const SPEED: f32 = 0.1;
const GOAL_RADIUS: f32 = 0.01;
const MAX_STEPS: usize = 200;
const BOUND: f32 = 1.0;

/// Position `x` in `[-1, 1]`, action `a` in `[-1, 1]`,
/// `x' = clamp(x + 0.1 a)`, reward `-|x'|` per step, done at `|x'| < 0.01`
/// or after 200 steps.
pub struct PointNav1d {
    x: f32,
    steps: usize,
}

impl PointNav1d {
    pub fn new() -> Self {
        PointNav1d { x: 0.0, steps: 0 }
    }
}

impl Default for PointNav1d {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for PointNav1d {
    fn observation_space(&self) -> Space {
        Space::uniform_box(-BOUND, BOUND, 1)
    }

    fn action_space(&self) -> Space {
        Space::uniform_box(-1.0, 1.0, 1)
    }

    fn env_info_spec(&self) -> StructSpec {
        super::chain::timeout_info_spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        self.x = rng.gen_range(-BOUND..=BOUND);
        self.steps = 0;
        vec![self.x]
    }

    fn step(&mut self, action: &Action, _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let a = action.continuous()?;
        let a0 = a[0].clamp(-1.0, 1.0);
        self.x = (self.x + SPEED * a0).clamp(-BOUND, BOUND);
        self.steps += 1;
        let reached = self.x.abs() < GOAL_RADIUS;
        let timeout = !reached && self.steps >= MAX_STEPS;
        Ok(EnvStep {
            observation: vec![self.x],
            reward: -self.x.abs(),
            done: reached || timeout,
            info: EnvInfo(vec![InfoValue::Bool(timeout)]),
        })
    }
}

/// Episode cost (sum of `|x'|` over steps) of the optimal bang-bang
/// controller `a = -sign(x)` from a given start, using the same dynamics.
pub fn bang_bang_cost(x0: f32) -> f64 {
    let mut x = x0;
    let mut cost = 0.0f64;
    for _ in 0..MAX_STEPS {
        let a = if x > 0.0 { -1.0 } else { 1.0 };
        x = (x + SPEED * a).clamp(-BOUND, BOUND);
        cost += x.abs() as f64;
        if x.abs() < GOAL_RADIUS {
            break;
        }
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn reward_matches_formula() {
        let mut env = PointNav1d::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        env.reset(&mut rng);
        env.x = 0.5;
        let s = env.step(&Action::Continuous(vec![-1.0]), &mut rng).unwrap();
        assert!((s.observation[0] - 0.4).abs() < 1e-6);
        assert!((s.reward + 0.4).abs() < 1e-6);
        assert!(!s.done);
    }

    #[test]
    fn reaches_goal_with_bang_bang() {
        let mut env = PointNav1d::new();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        env.reset(&mut rng);
        env.x = 0.95;
        let mut total = 0.0f64;
        let mut done = false;
        for _ in 0..MAX_STEPS {
            let a = if env.x > 0.0 { -1.0 } else { 1.0 };
            let s = env.step(&Action::Continuous(vec![a]), &mut rng).unwrap();
            total += -s.reward as f64;
            if s.done {
                done = true;
                break;
            }
        }
        assert!(done);
        assert!((total - bang_bang_cost(0.95)).abs() < 1e-9);
    }
}
