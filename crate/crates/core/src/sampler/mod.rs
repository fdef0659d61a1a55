//! The four sampling topologies, producing `[T, B]` sample batches with
//! identical semantics — and identical bits, given the per-slot seed
//! contract — in every mode.

mod alternating;
mod batch;
mod centralized;
mod collector;
mod eval;
mod parallel;
mod serial;

pub use alternating::{AlternatingSampler, ScheduleEvent};
pub use batch::{build_batch_spec, BatchLeaves};
pub use centralized::CentralizedSampler;
pub use collector::{collect_rows_local, zero_action, SlotState};
pub use eval::{evaluate, EvalSummary};
pub use parallel::DecentralizedSampler;
pub use serial::SerialSampler;

use crate::env::TrajInfo;
use crate::error::Result;
use crate::nn::ParamSet;
use crate::sarray::StructArray;

/// Which topology to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerMode {
    Serial,
    ParallelDecentralized,
    ParallelCentralized,
    Alternating,
}

impl SamplerMode {
    pub fn parse(s: &str) -> crate::error::Result<Self> {
        Ok(match s {
            "serial" => SamplerMode::Serial,
            "parallel_decentralized" => SamplerMode::ParallelDecentralized,
            "parallel_centralized" => SamplerMode::ParallelCentralized,
            "alternating" => SamplerMode::Alternating,
            _ => return Err(crate::error::Error::Parse(format!("unknown sampler mode `{s}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplerMode::Serial => "serial",
            SamplerMode::ParallelDecentralized => "parallel_decentralized",
            SamplerMode::ParallelCentralized => "parallel_centralized",
            SamplerMode::Alternating => "alternating",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    pub batch_t: usize,
    pub batch_b: usize,
    pub workers: usize,
    pub eval_envs: usize,
    pub eval_max_steps: usize,
    /// Discount used by TrajInfo diagnostics.
    pub discount: f64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.batch_t == 0 || self.batch_b == 0 {
            return Err(Error::InvalidConfig("batch dims must be positive".into()));
        }
        match self.mode {
            SamplerMode::ParallelDecentralized => {
                if self.workers == 0 || self.batch_b % self.workers != 0 {
                    return Err(Error::InvalidConfig(
                        "batch_B must be divisible by workers in decentralized mode".into(),
                    ));
                }
            }
            SamplerMode::Alternating => {
                if self.batch_b % 2 != 0 {
                    return Err(Error::InvalidConfig(
                        "alternating mode requires an even batch_B".into(),
                    ));
                }
                if self.workers == 0 || self.workers % 2 != 0 || self.batch_b % self.workers != 0 {
                    return Err(Error::InvalidConfig(
                        "alternating mode requires an even worker count dividing batch_B".into(),
                    ));
                }
            }
            SamplerMode::ParallelCentralized => {
                if self.workers == 0 || self.batch_b % self.workers != 0 {
                    return Err(Error::InvalidConfig(
                        "batch_B must be divisible by workers in centralized mode".into(),
                    ));
                }
            }
            SamplerMode::Serial => {}
        }
        Ok(())
    }
}

/// Parameters published by the optimizer for the sampler to adopt at the
/// next batch boundary.
pub struct ParamPublish<'a> {
    pub version: u64,
    pub params: &'a ParamSet,
}

/// One collected batch: a private snapshot of the `[T, B]` buffer, the
/// trajectories completed during collection, and bootstrap values when the
/// agent provides them.
pub struct SampleBatchOut {
    pub arr: StructArray,
    pub traj_infos: Vec<TrajInfo>,
    pub bootstrap_values: Option<Vec<f64>>,
    /// Cumulative env steps collected across all batches so far.
    pub cum_env_steps: usize,
}

pub trait Sampler {
    fn batch_dims(&self) -> (usize, usize);
    fn batch_spec(&self) -> &crate::sarray::StructSpec;
    fn next_batch(&mut self, publish: Option<ParamPublish<'_>>) -> Result<SampleBatchOut>;
    fn shutdown(&mut self);
}

/// CSV trace of a batch (t, b, action, reward, done) for equivalence tests
/// and debugging.
pub fn trace_csv(out: &SampleBatchOut, leaves: &BatchLeaves) -> String {
    let dims = out.arr.leading();
    let (t_len, b_len) = (dims[0], dims[1]);
    let discrete = out.arr.leaf(leaves.action).kind() == crate::sarray::ElemKind::I64;
    let mut s = String::from("t,b,action,reward,done\n");
    for t in 0..t_len {
        for b in 0..b_len {
            let cell = t * b_len + b;
            let action = if discrete {
                out.arr.get_i64(leaves.action, cell).to_string()
            } else {
                let mut buf = vec![0.0f32; out.arr.leaf(leaves.action).elem()];
                out.arr.cell_f32(leaves.action, cell, &mut buf);
                format!("{buf:?}").replace(',', ";")
            };
            s.push_str(&format!(
                "{t},{b},{action},{},{}\n",
                out.arr.get_f32(leaves.reward, cell),
                out.arr.get_bool(leaves.done, cell) as u8
            ));
        }
    }
    s
}
