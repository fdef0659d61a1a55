//! Environment and space abstractions plus built-in toy environments with
//! known oracles, and per-trajectory diagnostics.

pub mod cartpole;
pub mod chain;
pub mod masked_chain;
pub mod pointnav;
mod space;

pub use cartpole::CartPole;
pub use chain::{chain_optimal_q, ChainMdp};
pub use masked_chain::MaskedChain;
pub use pointnav::{bang_bang_cost, PointNav1d};
pub use space::Space;

use crate::error::{Error, Result};
use crate::sarray::StructSpec;
use rand_chacha::ChaCha8Rng;
use std::time::Duration;

/// A control action: a discrete index or a continuous vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(i64),
    Continuous(Vec<f32>),
}

impl Action {
    pub fn discrete(&self) -> Result<i64> {
        match self {
            Action::Discrete(a) => Ok(*a),
            Action::Continuous(_) => Err(Error::InvalidAction("expected discrete action".into())),
        }
    }

    pub fn continuous(&self) -> Result<&[f32]> {
        match self {
            Action::Continuous(v) => Ok(v),
            Action::Discrete(_) => Err(Error::InvalidAction("expected continuous action".into())),
        }
    }
}

/// One scalar field of an env_info record, in spec leaf order.
#[derive(Clone, Debug, PartialEq)]
pub enum InfoValue {
    F32(f32),
    I64(i64),
    Bool(bool),
}

/// Named record of per-step environment diagnostics. The schema is fixed
/// per environment: the same fields at every step of every episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvInfo(pub Vec<InfoValue>);

impl EnvInfo {
    /// The `timeout` flag when present (all built-in environments carry it
    /// as their first field).
    pub fn timeout(&self) -> bool {
        matches!(self.0.first(), Some(InfoValue::Bool(true)))
    }
}

#[derive(Clone, Debug)]
pub struct EnvStep {
    pub observation: Vec<f32>,
    pub reward: f32,
    pub done: bool,
    pub info: EnvInfo,
}

/// The task to be learned. Steps are deterministic given internal state,
/// action, and the per-slot rng stream; `done` terminates the episode and
/// the caller resets.
pub trait Env: Send {
    fn observation_space(&self) -> Space;
    fn action_space(&self) -> Space;
    fn env_info_spec(&self) -> StructSpec;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32>;
    fn step(&mut self, action: &Action, rng: &mut ChaCha8Rng) -> Result<EnvStep>;

    fn observation_dim(&self) -> usize {
        self.observation_space().flat_dim()
    }
}

/// Constructs one environment instance per slot.
pub type EnvFactory = dyn Fn(usize) -> Box<dyn Env> + Send + Sync;

/// Per-trajectory diagnostics, accumulated during sampling and frozen at
/// episode completion.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajInfo {
    pub length: usize,
    pub return_: f64,
    pub discounted_return: f64,
    discount: f64,
    cum_discount: f64,
}

impl TrajInfo {
    pub fn new(discount: f64) -> Self {
        TrajInfo { length: 0, return_: 0.0, discounted_return: 0.0, discount, cum_discount: 1.0 }
    }

    pub fn update(&mut self, step: &EnvStep) {
        self.length += 1;
        self.return_ += step.reward as f64;
        self.discounted_return += self.cum_discount * step.reward as f64;
        self.cum_discount *= self.discount;
    }

    /// Freeze and emit the completed record.
    pub fn complete(&self) -> TrajInfo {
        self.clone()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }
}

/// Wrapper adding an artificial per-step cost, for throughput experiments.
pub struct Delayed<E: Env> {
    inner: E,
    step_cost: Duration,
}

impl<E: Env> Delayed<E> {
    pub fn new(inner: E, step_cost: Duration) -> Self {
        Delayed { inner, step_cost }
    }
}

impl<E: Env> Env for Delayed<E> {
    fn observation_space(&self) -> Space {
        self.inner.observation_space()
    }

    fn action_space(&self) -> Space {
        self.inner.action_space()
    }

    fn env_info_spec(&self) -> StructSpec {
        self.inner.env_info_spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32> {
        self.inner.reset(rng)
    }

    fn step(&mut self, action: &Action, rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        std::thread::sleep(self.step_cost);
        self.inner.step(action, rng)
    }
}
