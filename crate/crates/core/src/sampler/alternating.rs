//! Alternating sampling: two worker groups, one stepping environments
//! while the master selects actions for the other. Batch content is
//! identical to centralized mode; only the schedule differs.

use super::batch::{build_batch_spec, BatchLeaves};
use super::centralized::{initial_observations, MasterSlot, WorkerPool};
use super::collector::{write_post_step, write_pre_step};
use super::{ParamPublish, SampleBatchOut, Sampler, SamplerConfig};
use crate::agent::{Agent, Realm, SlotInputs};
use crate::env::{Action, EnvFactory, EnvStep};
use crate::error::Result;
use crate::sarray::{Backing, StructArray, StructSpec};
use std::sync::Arc;

/// Master-side schedule events, recorded for interleave audits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScheduleEvent {
    Act(u8),
    Dispatch(u8),
    Receive(u8),
}

pub struct AlternatingSampler {
    cfg: SamplerConfig,
    spec: StructSpec,
    leaves: BatchLeaves,
    arr: StructArray,
    agent: Box<dyn Agent>,
    slots: Vec<MasterSlot>,
    pool: WorkerPool,
    cum_env_steps: usize,
    /// Events of the most recent batch.
    pub schedule: Vec<ScheduleEvent>,
}

impl AlternatingSampler {
    pub fn new(
        cfg: SamplerConfig,
        agent: Box<dyn Agent>,
        env_factory: Arc<EnvFactory>,
        master_seed: u64,
        realm: Realm,
    ) -> Result<Self> {
        cfg.validate()?;
        let probe = env_factory(0);
        let spec = build_batch_spec(probe.as_ref(), agent.as_ref())?;
        drop(probe);
        let leaves = BatchLeaves::from_spec(&spec);
        let arr = StructArray::allocate(&spec, &[cfg.batch_t, cfg.batch_b], Backing::Private)?;
        let (obs, action_space) =
            initial_observations(env_factory.as_ref(), cfg.batch_b, master_seed, realm);
        let slots = obs
            .into_iter()
            .enumerate()
            .map(|(slot, o)| MasterSlot::new(slot, o, action_space.clone(), cfg.discount))
            .collect();
        // group g owns slots [g*B/2, (g+1)*B/2); workers split evenly so a
        // worker's slots stay within one group
        let pool = WorkerPool::new(cfg.workers.max(2), cfg.batch_b, env_factory, master_seed, realm);
        Ok(AlternatingSampler {
            cfg,
            spec,
            leaves,
            arr,
            agent,
            slots,
            pool,
            cum_env_steps: 0,
            schedule: Vec::new(),
        })
    }

    fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        let half = self.cfg.batch_b / 2;
        g * half..(g + 1) * half
    }

    /// Act + write pre-step fields + dispatch for one group at one row.
    fn act_and_dispatch(
        &mut self,
        t: usize,
        g: usize,
    ) -> Result<Vec<(usize, Action)>> {
        let b = self.cfg.batch_b;
        let range = self.group_range(g);
        let slot_ids: Vec<usize> = range.clone().collect();
        let inputs: Vec<SlotInputs> = self.slots[range.clone()].iter().map(|s| s.inputs()).collect();
        self.schedule.push(ScheduleEvent::Act(g as u8));
        let steps = self.agent.act(&slot_ids, &inputs)?;
        let mut actions = Vec::with_capacity(slot_ids.len());
        for (i, agent_step) in steps.into_iter().enumerate() {
            let slot = &self.slots[range.start + i];
            write_pre_step(
                &mut self.arr,
                &self.leaves,
                t,
                slot.slot,
                b,
                &slot.obs,
                &slot.prev_action,
                slot.prev_reward,
                &agent_step.action,
                &agent_step.info,
            );
            actions.push((slot.slot, agent_step.action.clone()));
        }
        self.schedule.push(ScheduleEvent::Dispatch(g as u8));
        self.pool.dispatch(actions.clone())?;
        Ok(actions)
    }

    fn receive_group(
        &mut self,
        t: usize,
        g: usize,
        actions: Vec<(usize, Action)>,
        trajs: &mut Vec<crate::env::TrajInfo>,
    ) -> Result<()> {
        let b = self.cfg.batch_b;
        self.schedule.push(ScheduleEvent::Receive(g as u8));
        let mut results: Vec<Option<(EnvStep, Option<Vec<f32>>)>> = vec![None; b];
        let wanted: Vec<usize> = self.group_range(g).collect();
        self.pool.collect_slots(&wanted, &mut results)?;
        for (slot, action) in actions {
            let (env_step, reset_obs) = results[slot].take().expect("group slot replied");
            write_post_step(&mut self.arr, &self.leaves, t, slot, b, &env_step);
            let done = env_step.done;
            if let Some(record) = self.slots[slot].advance(action, &env_step, reset_obs) {
                trajs.push(record);
            }
            if done {
                self.agent.reset_slot(slot);
            }
        }
        Ok(())
    }
}

impl Sampler for AlternatingSampler {
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
        self.schedule.clear();
        let mut trajs = Vec::new();
        for t in 0..self.cfg.batch_t {
            // group 0's environments step while the master selects group
            // 1's actions, and vice versa
            let a0 = self.act_and_dispatch(t, 0)?;
            let a1 = self.act_and_dispatch(t, 1)?;
            self.receive_group(t, 0, a0, &mut trajs)?;
            self.receive_group(t, 1, a1, &mut trajs)?;
        }
        self.cum_env_steps += self.cfg.batch_t * self.cfg.batch_b;
        let bootstrap_values = if self.agent.wants_bootstrap() {
            let slot_ids: Vec<usize> = (0..self.cfg.batch_b).collect();
            let inputs: Vec<SlotInputs> = self.slots.iter().map(|s| s.inputs()).collect();
            Some(self.agent.state_values(&slot_ids, &inputs)?)
        } else {
            None
        };
        Ok(SampleBatchOut {
            arr: self.arr.to_private(),
            traj_infos: trajs,
            bootstrap_values,
            cum_env_steps: self.cum_env_steps,
        })
    }

    fn shutdown(&mut self) {
        self.pool.stop();
    }
}

impl Drop for AlternatingSampler {
    fn drop(&mut self) {
        self.pool.stop();
    }
}
