//! Parallel-decentralized sampling: worker threads own environment slots
//! and full agent copies, write disjoint column regions of a shared batch
//! buffer, and rendezvous with the master once per batch.

use super::batch::{build_batch_spec, BatchLeaves};
use super::collector::{collect_rows_local, SlotState};
use super::{ParamPublish, SampleBatchOut, Sampler, SamplerConfig};
use crate::agent::{Agent, Realm, SlotInputs};
use crate::env::{EnvFactory, TrajInfo};
use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::sarray::{Backing, StructArray, StructSpec};
use std::sync::mpsc;
use std::sync::{Arc, Barrier, Mutex};
use std::thread::JoinHandle;

struct Publish {
    version: u64,
    params: Option<ParamSet>,
    cum_env_steps: usize,
    shutdown: bool,
}

struct BatchReport {
    worker: usize,
    trajs: Vec<TrajInfo>,
    bootstraps: Vec<(usize, f64)>,
    error: Option<String>,
}

pub struct DecentralizedSampler {
    cfg: SamplerConfig,
    spec: StructSpec,
    shared: StructArray,
    start: Arc<Barrier>,
    end: Arc<Barrier>,
    publish: Arc<Mutex<Publish>>,
    reports: mpsc::Receiver<BatchReport>,
    handles: Vec<JoinHandle<()>>,
    cum_env_steps: usize,
    wants_bootstrap: bool,
    down: bool,
}

impl DecentralizedSampler {
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
        let shared = StructArray::allocate(&spec, &[cfg.batch_t, cfg.batch_b], Backing::Shared)?;
        let workers = cfg.workers.max(1);
        let per = cfg.batch_b / workers;
        let start = Arc::new(Barrier::new(workers + 1));
        let end = Arc::new(Barrier::new(workers + 1));
        let publish = Arc::new(Mutex::new(Publish {
            version: 0,
            params: None,
            cum_env_steps: 0,
            shutdown: false,
        }));
        let (tx, reports) = mpsc::channel::<BatchReport>();
        let wants_bootstrap = agent.wants_bootstrap();

        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let mut worker_agent = agent.fork();
            let mut arr = shared.clone();
            let leaves = leaves.clone();
            let start = start.clone();
            let end = end.clone();
            let publish = publish.clone();
            let tx = tx.clone();
            let factory = env_factory.clone();
            let (batch_t, batch_b) = (cfg.batch_t, cfg.batch_b);
            let discount = cfg.discount;
            handles.push(std::thread::spawn(move || {
                let mut states: Vec<SlotState> = (w * per..(w + 1) * per)
                    .map(|slot| SlotState::new(slot, factory(slot), master_seed, realm, discount))
                    .collect();
                loop {
                    start.wait();
                    {
                        let p = publish.lock().unwrap();
                        if p.shutdown {
                            return;
                        }
                        if let Some(params) = &p.params {
                            worker_agent.refresh(p.version, params, p.cum_env_steps);
                        }
                    }
                    let mut trajs = Vec::new();
                    let result = collect_rows_local(
                        worker_agent.as_mut(),
                        &mut states,
                        &mut arr,
                        &leaves,
                        batch_t,
                        batch_b,
                        &mut trajs,
                    );
                    let mut report = BatchReport {
                        worker: w,
                        trajs,
                        bootstraps: Vec::new(),
                        error: result.err().map(|e| e.to_string()),
                    };
                    if report.error.is_none() && worker_agent.wants_bootstrap() {
                        let slots: Vec<usize> = states.iter().map(|s| s.slot).collect();
                        let inputs: Vec<SlotInputs> = states.iter().map(|s| s.inputs()).collect();
                        match worker_agent.state_values(&slots, &inputs) {
                            Ok(values) => {
                                report.bootstraps = slots.into_iter().zip(values).collect()
                            }
                            Err(e) => report.error = Some(e.to_string()),
                        }
                    }
                    let _ = tx.send(report);
                    end.wait();
                }
            }));
        }
        Ok(DecentralizedSampler {
            cfg,
            spec,
            shared,
            start,
            end,
            publish,
            reports,
            handles,
            cum_env_steps: 0,
            wants_bootstrap,
            down: false,
        })
    }

    fn stop_workers(&mut self) {
        if self.down {
            return;
        }
        self.down = true;
        self.publish.lock().unwrap().shutdown = true;
        self.start.wait();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

impl Sampler for DecentralizedSampler {
    fn batch_dims(&self) -> (usize, usize) {
        (self.cfg.batch_t, self.cfg.batch_b)
    }

    fn batch_spec(&self) -> &StructSpec {
        &self.spec
    }

    fn next_batch(&mut self, publish: Option<ParamPublish<'_>>) -> Result<SampleBatchOut> {
        if self.down {
            return Err(Error::Replay("sampler is shut down".into()));
        }
        {
            let mut p = self.publish.lock().unwrap();
            if let Some(pp) = publish {
                p.version = pp.version;
                p.params = Some(pp.params.clone());
            }
            p.cum_env_steps = self.cum_env_steps;
        }
        self.start.wait();
        self.end.wait();
        let mut trajs = Vec::new();
        let mut boots = vec![0.0f64; self.cfg.batch_b];
        for _ in 0..self.handles.len() {
            let report = self
                .reports
                .recv()
                .map_err(|_| Error::WorkerDied(usize::MAX, "report channel closed".into()))?;
            if let Some(msg) = report.error {
                let worker = report.worker;
                self.stop_workers();
                return Err(Error::WorkerDied(worker, msg));
            }
            trajs.extend(report.trajs);
            for (slot, v) in report.bootstraps {
                boots[slot] = v;
            }
        }
        self.cum_env_steps += self.cfg.batch_t * self.cfg.batch_b;
        Ok(SampleBatchOut {
            arr: self.shared.to_private(),
            traj_infos: trajs,
            bootstrap_values: self.wants_bootstrap.then_some(boots),
            cum_env_steps: self.cum_env_steps,
        })
    }

    fn shutdown(&mut self) {
        self.stop_workers();
    }
}

impl Drop for DecentralizedSampler {
    fn drop(&mut self) {
        self.stop_workers();
    }
}
