//! Single-node reinforcement learning infrastructure.
//!
//! The crate is organized around a small set of subsystems:
//!
//! - [`sarray`]: structured array containers — nested, named collections of
//!   dense arrays sharing leading dimensions, with sliced read/write and an
//!   optional shared backing for inter-worker use.
//! - [`nn`]: self-contained dense numerics — tensors, MLP and recurrent
//!   cells with reverse-mode gradients, Adam, gradient all-reduce, and
//!   probability distributions.
//! - [`env`]: environment and space abstractions plus built-in toy
//!   environments with known oracles.
//! - [`agent`]: action selection, per-slot random streams, recurrent state
//!   handling, and leading-dimension inference.
//! - [`sampler`]: the four sampling topologies (serial, parallel
//!   decentralized, parallel centralized, alternating) producing
//!   `[Time, Batch]` sample buffers with identical semantics in every mode.
//! - [`replay`]: replay buffer family — uniform n-step, prioritized
//!   (sum tree), sequence replay with stored recurrent state, and a
//!   frame-dedup store.
//! - [`algo`]: loss construction and optimization steps for value learning,
//!   policy gradients, and Q-value policy gradients.
//! - [`runner`]: training orchestration — serial, synchronous multi-learner,
//!   and asynchronous sampler/optimizer modes — plus CSV logging.
//! - [`launch`]: experiment configs, variant grids, the local experiment
//!   queue, and plot/summary export.

pub mod agent;
pub mod algo;
pub mod env;
pub mod error;
pub mod launch;
pub mod nn;
pub mod replay;
pub mod runner;
pub mod sampler;
pub mod sarray;

pub use error::{Error, Result};
