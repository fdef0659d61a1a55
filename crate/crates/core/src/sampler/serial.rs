//! Serial sampling: agent and environments run in the calling thread.

use super::batch::{build_batch_spec, BatchLeaves};
use super::collector::{collect_rows_local, SlotState};
use super::{ParamPublish, SampleBatchOut, Sampler, SamplerConfig};
use crate::agent::{Agent, Realm, SlotInputs};
use crate::env::EnvFactory;
use crate::error::Result;
use crate::sarray::{Backing, StructArray, StructSpec};

pub struct SerialSampler {
    cfg: SamplerConfig,
    agent: Box<dyn Agent>,
    states: Vec<SlotState>,
    arr: StructArray,
    spec: StructSpec,
    leaves: BatchLeaves,
    cum_env_steps: usize,
}

impl SerialSampler {
    pub fn new(
        cfg: SamplerConfig,
        agent: Box<dyn Agent>,
        env_factory: &EnvFactory,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        cfg.validate()?;
        let probe = env_factory(0);
        let spec = build_batch_spec(probe.as_ref(), agent.as_ref())?;
        drop(probe);
        let leaves = BatchLeaves::from_spec(&spec);
        let arr = StructArray::allocate(&spec, &[cfg.batch_t, cfg.batch_b], Backing::Private)?;
        let states = (0..cfg.batch_b)
            .map(|slot| SlotState::new(slot, env_factory(slot), master_seed, realm, cfg.discount))
            .collect();
        Ok(SerialSampler { cfg, agent, states, arr, spec, leaves, cum_env_steps: 0 })
    }

    pub fn agent_mut(&mut self) -> &mut dyn Agent {
        self.agent.as_mut()
    }

    pub fn agent(&self) -> &dyn Agent {
        self.agent.as_ref()
    }
}

impl Sampler for SerialSampler {
    fn batch_dims(&self) -> (usize, usize) {
        (self.cfg.batch_t, self.cfg.batch_b)
    }

    fn batch_spec(&self) -> &StructSpec {
        &self.spec
    }

    fn next_batch(&mut self, publish: Option<ParamPublish<'_>>) -> Result<SampleBatchOut> {
        if let Some(p) = publish {
            self.agent.refresh(p.version, p.params, self.cum_env_steps);
        }
        let mut traj_infos = Vec::new();
        collect_rows_local(
            self.agent.as_mut(),
            &mut self.states,
            &mut self.arr,
            &self.leaves,
            self.cfg.batch_t,
            self.cfg.batch_b,
            &mut traj_infos,
        )?;
        self.cum_env_steps += self.cfg.batch_t * self.cfg.batch_b;
        let bootstrap_values = if self.agent.wants_bootstrap() {
            let slots: Vec<usize> = self.states.iter().map(|s| s.slot).collect();
            let inputs: Vec<SlotInputs> = self.states.iter().map(|s| s.inputs()).collect();
            Some(self.agent.state_values(&slots, &inputs)?)
        } else {
            None
        };
        Ok(SampleBatchOut {
            arr: self.arr.to_private(),
            traj_infos,
            bootstrap_values,
            cum_env_steps: self.cum_env_steps,
        })
    }

    fn shutdown(&mut self) {}
}
