//! Partially observable memory task: a cue shown only at the first step
//! must be reproduced as the action at the end of a blank corridor.

use super::{Action, Env, EnvInfo, EnvStep, InfoValue, Space};
use crate::error::Result;
use crate::sarray::StructSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Observation layout: `[cue_visible, cue_value, at_end]`.
///
/// The episode starts with the cue bit visible; the corridor of length `L`
/// shows blank observations; at the end marker the rewarded action equals
/// the cue. A memoryless policy earns 0.5 expected terminal reward; a
/// recurrent policy can earn 1.0.
pub struct MaskedChain {
    corridor: usize,
    cue: i64,
    t: usize,
}

impl MaskedChain {
    pub fn new(corridor: usize) -> Self {
        assert!(corridor >= 1);
        MaskedChain { corridor, cue: 0, t: 0 }
    }

    fn obs_at(&self, t: usize) -> Vec<f32> {
        if t == 0 {
            vec![1.0, self.cue as f32, 0.0]
        } else if t < self.corridor {
            vec![0.0, 0.0, 0.0]
        } else {
            vec![0.0, 0.0, 1.0]
        }
    }
}

impl Env for MaskedChain {
    fn observation_space(&self) -> Space {
        Space::uniform_box(0.0, 1.0, 3)
    }

    fn action_space(&self) -> Space {
        Space::discrete(2)
    }

    fn env_info_spec(&self) -> StructSpec {
        super::chain::timeout_info_spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        self.cue = rng.gen_range(0..2);
        self.t = 0;
        self.obs_at(0)
    }

    fn step(&mut self, action: &Action, _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let a = action.discrete()?;
        let answering = self.t == self.corridor;
        self.t += 1;
        if answering {
            Ok(EnvStep {
                observation: vec![0.0, 0.0, 0.0],
                reward: if a == self.cue { 1.0 } else { 0.0 },
                done: true,
                info: EnvInfo(vec![InfoValue::Bool(false)]),
            })
        } else {
            Ok(EnvStep {
                observation: self.obs_at(self.t),
                reward: 0.0,
                done: false,
                info: EnvInfo(vec![InfoValue::Bool(false)]),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn run_episode(env: &mut MaskedChain, rng: &mut ChaCha8Rng, answer: i64) -> f32 {
        env.reset(rng);
        let mut reward = 0.0;
        loop {
            let at_end = env.t == env.corridor;
            let a = if at_end { answer } else { 0 };
            let s = env.step(&Action::Discrete(a), rng).unwrap();
            reward += s.reward;
            if s.done {
                return reward;
            }
        }
    }

    #[test]
    fn matching_answer_pays_one() {
        let mut env = MaskedChain::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        let cue = env.cue;
        // replay deterministically: corridor steps then answer with the cue
        for _ in 0..6 {
            let s = env.step(&Action::Discrete(0), &mut rng).unwrap();
            assert!(!s.done);
            assert_eq!(s.reward, 0.0);
        }
        let last = env.step(&Action::Discrete(cue), &mut rng).unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 1.0);
    }

    #[test]
    fn wrong_answer_pays_zero() {
        let mut env = MaskedChain::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        let wrong = 1 - env.cue;
        for _ in 0..6 {
            env.step(&Action::Discrete(0), &mut rng).unwrap();
        }
        let last = env.step(&Action::Discrete(wrong), &mut rng).unwrap();
        assert!(last.done);
        assert_eq!(last.reward, 0.0);
    }

    #[test]
    fn constant_policy_earns_half_on_average() {
        let mut env = MaskedChain::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut total = 0.0f64;
        for _ in 0..n {
            total += run_episode(&mut env, &mut rng, 1) as f64;
        }
        let mean = total / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }
}
