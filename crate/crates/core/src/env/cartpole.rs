//! Classic cart-pole balancing with Euler integration.

use super::{Action, Env, EnvInfo, EnvStep, InfoValue, Space};
use crate::error::Result;
use crate::sarray::StructSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;
const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
const X_THRESHOLD: f64 = 2.4;
const MAX_STEPS: usize = 500;

pub struct CartPole {
    state: [f64; 4], // x, x_dot, theta, theta_dot
    steps: usize,
    terminated: bool,
}

impl CartPole {
    pub fn new() -> Self {
        CartPole { state: [0.0; 4], steps: 0, terminated: true }
    }

    fn obs(&self) -> Vec<f32> {
        self.state.iter().map(|&v| v as f32).collect()
    }
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for CartPole {
    fn observation_space(&self) -> Space {
        let high = vec![
            (X_THRESHOLD * 2.0) as f32,
            f32::MAX,
            (THETA_THRESHOLD * 2.0) as f32,
            f32::MAX,
        ];
        Space::Box { low: high.iter().map(|v| -v).collect(), high }
    }

    fn action_space(&self) -> Space {
        Space::discrete(2)
    }

    fn env_info_spec(&self) -> StructSpec {
        super::chain::timeout_info_spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        for v in &mut self.state {
            *v = rng.gen_range(-0.05..=0.05);
        }
        self.steps = 0;
        self.terminated = false;
        self.obs()
    }

    fn step(&mut self, action: &Action, _rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let a = action.discrete()?;
        let force = if a == 1 { FORCE_MAG } else { -FORCE_MAG };
        let [mut x, mut x_dot, mut theta, mut theta_dot] = self.state;

        let cos_t = theta.cos();
        let sin_t = theta.sin();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin_t) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin_t - cos_t * temp)
            / (HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t * cos_t / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS;

        x += TAU * x_dot;
        x_dot += TAU * x_acc;
        theta += TAU * theta_dot;
        theta_dot += TAU * theta_acc;
        self.state = [x, x_dot, theta, theta_dot];
        self.steps += 1;

        let fell = x < -X_THRESHOLD || x > X_THRESHOLD || theta < -THETA_THRESHOLD || theta > THETA_THRESHOLD;
        let timeout = !fell && self.steps >= MAX_STEPS;
        self.terminated = fell || timeout;
        Ok(EnvStep {
            observation: self.obs(),
            reward: 1.0,
            done: self.terminated,
            info: EnvInfo(vec![InfoValue::Bool(timeout)]),
        })
    }
}
