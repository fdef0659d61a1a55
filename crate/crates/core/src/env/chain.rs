//! Deterministic chain MDP with a rewarded right end, plus its value
//! iteration oracle.

use super::{Action, Env, EnvInfo, EnvStep, InfoValue, Space};
use crate::error::{Error, Result};
use crate::sarray::{ElemKind, SpecNode, StructSpec};
use rand_chacha::ChaCha8Rng;

/// States `0..n-1`; state `n-1` is terminal. Action 0 moves left (stuck at
/// 0), action 1 moves right. Reaching the terminal state pays reward 1;
/// every other transition pays 0. Observations are one-hot over `n`.
pub struct ChainMdp {
    n: usize,
    state: usize,
    steps: usize,
    max_steps: usize,
}

impl ChainMdp {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        ChainMdp { n, state: 0, steps: 0, max_steps: 1000 }
    }

    fn one_hot(&self, s: usize) -> Vec<f32> {
        let mut obs = vec![0.0; self.n];
        obs[s] = 1.0;
        obs
    }
}

impl Env for ChainMdp {
    fn observation_space(&self) -> Space {
        Space::uniform_box(0.0, 1.0, self.n)
    }

    fn action_space(&self) -> Space {
        Space::discrete(2)
    }

    fn env_info_spec(&self) -> StructSpec {
        timeout_info_spec()
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f32> {
        self.state = 0;
        self.steps = 0;
        self.one_hot(0)
    }

    fn step(&mut self, action: &Action, _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let a = action.discrete()?;
        if a > 1 {
            return Err(Error::InvalidAction(format!("chain action {a}")));
        }
        self.steps += 1;
        let next = if a == 1 { self.state + 1 } else { self.state.saturating_sub(1) };
        let reached_end = next == self.n - 1;
        let timeout = !reached_end && self.steps >= self.max_steps;
        self.state = if reached_end { next } else { next.min(self.n - 2) };
        Ok(EnvStep {
            observation: self.one_hot(self.state),
            reward: if reached_end { 1.0 } else { 0.0 },
            done: reached_end || timeout,
            info: EnvInfo(vec![InfoValue::Bool(timeout)]),
        })
    }
}

pub(super) fn timeout_info_spec() -> StructSpec {
    StructSpec::new(SpecNode::Record {
        fields: vec![(
            "timeout".to_string(),
            SpecNode::Leaf { kind: ElemKind::Bool, shape: vec![] },
        )],
    })
    .unwrap()
}

/// Optimal Q table via value iteration to fixpoint (residual < 1e-12).
/// Rows are the non-terminal states `0..n-1` (terminal excluded), columns
/// `[left, right]`.
pub fn chain_optimal_q(n: usize, gamma: f64) -> Vec<[f64; 2]> {
    assert!(n >= 2 && gamma > 0.0 && gamma < 1.0);
    let states = n - 1;
    let mut q = vec![[0.0f64; 2]; states];
    loop {
        let mut residual = 0.0f64;
        for s in 0..states {
            for a in 0..2 {
                let (next, reward) = if a == 1 {
                    (s + 1, if s + 1 == states { 1.0 } else { 0.0 })
                } else {
                    (s.saturating_sub(1), 0.0)
                };
                let bootstrap = if a == 1 && next == states {
                    0.0
                } else {
                    q[next][0].max(q[next][1])
                };
                let new = reward + gamma * bootstrap;
                residual = residual.max((new - q[s][a]).abs());
                q[s][a] = new;
            }
        }
        if residual < 1e-12 {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn terminal_transition() {
        let mut env = ChainMdp::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = env.reset(&mut rng);
        assert_eq!(obs[0], 1.0);
        // eight right steps reach state 8 without reward
        for _ in 0..8 {
            let s = env.step(&Action::Discrete(1), &mut rng).unwrap();
            assert!(!s.done);
            assert_eq!(s.reward, 0.0);
        }
        // from state 8, stepping right terminates with reward 1
        let last = env.step(&Action::Discrete(1), &mut rng).unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 1.0);
    }

    #[test]
    fn left_from_zero_stays() {
        let mut env = ChainMdp::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        let s = env.step(&Action::Discrete(0), &mut rng).unwrap();
        assert_eq!(s.observation[0], 1.0);
        assert!(!s.done);
    }

    #[test]
    fn optimal_q_values() {
        let q = chain_optimal_q(10, 0.9);
        assert!((q[8][1] - 1.0).abs() < 1e-12);
        assert!((q[7][1] - 0.9).abs() < 1e-12);
        // monotone: right is never worse than left
        for row in &q {
            assert!(row[0] <= row[1] + 1e-12);
        }
    }
}
