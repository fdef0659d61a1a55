//! Parallel-centralized sampling: worker threads step environments, the
//! master batches every observation into one agent call per simulation
//! step. Two rendezvous per step (observations ready, actions ready) are
//! realized with channels.

use super::batch::{build_batch_spec, BatchLeaves};
use super::collector::{write_post_step, write_pre_step, zero_action};
use super::{ParamPublish, SampleBatchOut, Sampler, SamplerConfig};
use crate::agent::{action_enc_dim, encode_action, Agent, Realm, SlotInputs, StreamDomain};
use crate::env::{Action, EnvFactory, EnvStep, Space, TrajInfo};
use crate::error::{Error, Result};
use crate::sarray::{Backing, StructArray, StructSpec};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;

pub(super) enum Cmd {
    Step(Vec<(usize, Action)>),
    Stop,
}

pub(super) struct Reply {
    pub worker: usize,
    pub slot: usize,
    pub result: std::result::Result<(EnvStep, Option<Vec<f32>>), String>,
}

/// Environment-stepping workers addressed by slot.
pub(super) struct WorkerPool {
    to_workers: Vec<mpsc::Sender<Cmd>>,
    replies: mpsc::Receiver<Reply>,
    handles: Vec<JoinHandle<()>>,
    slot_to_worker: Vec<usize>,
    /// Replies that arrived while waiting for a different slot group.
    pending: Vec<Option<(EnvStep, Option<Vec<f32>>)>>,
    down: bool,
}

impl WorkerPool {
    pub fn new(
        workers: usize,
        batch_b: usize,
        env_factory: Arc<EnvFactory>,
        master_seed: u64,
        realm: Realm,
    ) -> Self {
        let per = batch_b / workers;
        let (reply_tx, replies) = mpsc::channel::<Reply>();
        let mut to_workers = Vec::with_capacity(workers);
        let mut handles = Vec::with_capacity(workers);
        let mut slot_to_worker = vec![0usize; batch_b];
        for w in 0..workers {
            let (tx, rx) = mpsc::channel::<Cmd>();
            to_workers.push(tx);
            let reply_tx = reply_tx.clone();
            let factory = env_factory.clone();
            for slot in w * per..(w + 1) * per {
                slot_to_worker[slot] = w;
            }
            handles.push(std::thread::spawn(move || {
                let mut envs: Vec<_> = (w * per..(w + 1) * per)
                    .map(|slot| {
                        let env = factory(slot);
                        let rng = crate::agent::derive_stream(
                            master_seed,
                            realm,
                            StreamDomain::EnvDynamics,
                            slot,
                        );
                        (slot, env, rng)
                    })
                    .collect();
                // prime each env so reset draws match the other modes
                for (_, env, rng) in &mut envs {
                    let _ = env.reset(rng);
                }
                while let Ok(cmd) = rx.recv() {
                    match cmd {
                        Cmd::Stop => return,
                        Cmd::Step(actions) => {
                            for (slot, action) in actions {
                                let entry = envs
                                    .iter_mut()
                                    .find(|(s, _, _)| *s == slot)
                                    .expect("slot routed to wrong worker");
                                let (_, env, rng) = entry;
                                let result = match env.step(&action, rng) {
                                    Ok(step) => {
                                        let reset_obs =
                                            step.done.then(|| env.reset(rng));
                                        Ok((step, reset_obs))
                                    }
                                    Err(e) => Err(e.to_string()),
                                };
                                let _ = reply_tx.send(Reply { worker: w, slot, result });
                            }
                        }
                    }
                }
            }));
        }
        WorkerPool {
            to_workers,
            replies,
            handles,
            slot_to_worker,
            pending: (0..batch_b).map(|_| None).collect(),
            down: false,
        }
    }

    /// Send actions to the owning workers, grouped per worker in slot order.
    pub fn dispatch(&self, actions: Vec<(usize, Action)>) -> Result<()> {
        let workers = self.to_workers.len();
        let mut per_worker: Vec<Vec<(usize, Action)>> = vec![Vec::new(); workers];
        for (slot, action) in actions {
            per_worker[self.slot_to_worker[slot]].push((slot, action));
        }
        for (w, list) in per_worker.into_iter().enumerate() {
            if !list.is_empty() {
                self.to_workers[w]
                    .send(Cmd::Step(list))
                    .map_err(|_| Error::WorkerDied(w, "command channel closed".into()))?;
            }
        }
        Ok(())
    }

    /// Wait until every wanted slot has replied; replies for other slots
    /// are stashed for their own group's collection.
    pub fn collect_slots(
        &mut self,
        wanted: &[usize],
        sink: &mut [Option<(EnvStep, Option<Vec<f32>>)>],
    ) -> Result<()> {
        for &s in wanted {
            if let Some(x) = self.pending[s].take() {
                sink[s] = Some(x);
            }
        }
        while wanted.iter().any(|&s| sink[s].is_none()) {
            let reply = self
                .replies
                .recv()
                .map_err(|_| Error::WorkerDied(usize::MAX, "reply channel closed".into()))?;
            match reply.result {
                Ok(step) => {
                    if wanted.contains(&reply.slot) {
                        sink[reply.slot] = Some(step);
                    } else {
                        self.pending[reply.slot] = Some(step);
                    }
                }
                Err(msg) => return Err(Error::WorkerDied(reply.worker, msg)),
            }
        }
        Ok(())
    }

    pub fn stop(&mut self) {
        if self.down {
            return;
        }
        self.down = true;
        for tx in &self.to_workers {
            let _ = tx.send(Cmd::Stop);
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

/// Master-side per-slot bookkeeping (the env itself lives in a worker).
pub(super) struct MasterSlot {
    pub slot: usize,
    pub obs: Vec<f32>,
    pub prev_action: Action,
    pub prev_action_enc: Vec<f32>,
    pub prev_reward: f32,
    pub traj: TrajInfo,
    action_space: Space,
}

impl MasterSlot {
    pub fn new(slot: usize, obs: Vec<f32>, action_space: Space, discount: f64) -> Self {
        let zero = zero_action(&action_space);
        let mut enc = vec![0.0; action_enc_dim(&action_space)];
        encode_action(&action_space, &zero, &mut enc);
        MasterSlot {
            slot,
            obs,
            prev_action: zero,
            prev_action_enc: enc,
            prev_reward: 0.0,
            traj: TrajInfo::new(discount),
            action_space,
        }
    }

    pub fn inputs(&self) -> SlotInputs<'_> {
        SlotInputs {
            obs: &self.obs,
            prev_action: &self.prev_action_enc,
            prev_reward: self.prev_reward,
        }
    }

    /// Advance after a step result; returns the completed trajectory on
    /// episode end.
    pub fn advance(
        &mut self,
        action: Action,
        step: &EnvStep,
        reset_obs: Option<Vec<f32>>,
    ) -> Option<TrajInfo> {
        self.traj.update(step);
        if step.done {
            let record = self.traj.complete();
            self.traj = TrajInfo::new(record.discount());
            self.obs = reset_obs.expect("reset obs accompanies done");
            self.prev_action = zero_action(&self.action_space);
            encode_action(&self.action_space, &self.prev_action, &mut self.prev_action_enc);
            self.prev_reward = 0.0;
            Some(record)
        } else {
            self.obs = step.observation.clone();
            encode_action(&self.action_space, &action, &mut self.prev_action_enc);
            self.prev_action = action;
            self.prev_reward = step.reward;
            None
        }
    }
}

/// Replay the master's initial env resets so master-side observations match
/// what the workers produced at construction.
pub(super) fn initial_observations(
    env_factory: &EnvFactory,
    batch_b: usize,
    master_seed: u64,
    realm: Realm,
) -> (Vec<Vec<f32>>, Space) {
    let mut obs = Vec::with_capacity(batch_b);
    let mut space = None;
    for slot in 0..batch_b {
        let mut env = env_factory(slot);
        let mut rng =
            crate::agent::derive_stream(master_seed, realm, StreamDomain::EnvDynamics, slot);
        obs.push(env.reset(&mut rng));
        space.get_or_insert_with(|| env.action_space());
    }
    (obs, space.expect("at least one slot"))
}

pub struct CentralizedSampler {
    cfg: SamplerConfig,
    spec: StructSpec,
    leaves: BatchLeaves,
    arr: StructArray,
    agent: Box<dyn Agent>,
    slots: Vec<MasterSlot>,
    pool: WorkerPool,
    cum_env_steps: usize,
}

impl CentralizedSampler {
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
        let pool = WorkerPool::new(cfg.workers.max(1), cfg.batch_b, env_factory, master_seed, realm);
        Ok(CentralizedSampler {
            cfg,
            spec,
            leaves,
            arr,
            agent,
            slots,
            pool,
            cum_env_steps: 0,
        })
    }
}

impl Sampler for CentralizedSampler {
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
        let b = self.cfg.batch_b;
        let mut trajs = Vec::new();
        for t in 0..self.cfg.batch_t {
            let slot_ids: Vec<usize> = (0..b).collect();
            let inputs: Vec<SlotInputs> = self.slots.iter().map(|s| s.inputs()).collect();
            let steps = self.agent.act(&slot_ids, &inputs)?;
            let mut actions = Vec::with_capacity(b);
            for (i, agent_step) in steps.iter().enumerate() {
                let slot = &self.slots[i];
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
            self.pool.dispatch(actions)?;
            let mut results: Vec<Option<(EnvStep, Option<Vec<f32>>)>> = vec![None; b];
            let all: Vec<usize> = (0..b).collect();
            self.pool.collect_slots(&all, &mut results)?;
            for (i, agent_step) in steps.into_iter().enumerate() {
                let (env_step, reset_obs) = results[i].take().expect("all slots replied");
                write_post_step(&mut self.arr, &self.leaves, t, i, b, &env_step);
                let done = env_step.done;
                if let Some(record) = self.slots[i].advance(agent_step.action, &env_step, reset_obs) {
                    trajs.push(record);
                }
                if done {
                    self.agent.reset_slot(i);
                }
            }
        }
        self.cum_env_steps += self.cfg.batch_t * b;
        let bootstrap_values = if self.agent.wants_bootstrap() {
            let slot_ids: Vec<usize> = (0..b).collect();
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

impl Drop for CentralizedSampler {
    fn drop(&mut self) {
        self.pool.stop();
    }
}
