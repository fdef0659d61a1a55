//! Deterministic continuous-control actor with Gaussian exploration noise.

use super::slot_rng::{Realm, SlotStreams, StreamDomain};
use super::{obs_matrix, Agent, AgentSlotStep, SlotInputs};
use crate::env::Action;
use crate::error::Result;
use crate::nn::{mlp_forward, MlpConfig, ParamSet};
use crate::sarray::{ElemKind, SpecNode, StructSpec};
use rand::Rng;
use rand_distr::StandardNormal;

pub struct QpgAgent {
    actor_cfg: MlpConfig,
    params: ParamSet,
    version: u64,
    noise_sigma: f64,
    streams: SlotStreams,
    eval: bool,
    master_seed: u64,
    realm: Realm,
}

impl QpgAgent {
    pub fn new(
        actor_cfg: MlpConfig,
        params: ParamSet,
        noise_sigma: f64,
        master_seed: u64,
        realm: Realm,
    ) -> Self {
        QpgAgent {
            actor_cfg,
            params,
            version: 0,
            noise_sigma,
            streams: SlotStreams::new(master_seed, realm, StreamDomain::AgentAction),
            eval: false,
            master_seed,
            realm,
        }
    }

    fn act_dim(&self) -> usize {
        self.actor_cfg.output_dim
    }
}

impl Agent for QpgAgent {
    fn agent_info_spec(&self) -> StructSpec {
        StructSpec::new(SpecNode::Record {
            fields: vec![(
                "mu".to_string(),
                SpecNode::Leaf { kind: ElemKind::F32, shape: vec![self.act_dim()] },
            )],
        })
        .unwrap()
    }

    fn act(&mut self, slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<AgentSlotStep>> {
        let x = obs_matrix(inputs);
        let (y, _) = mlp_forward(&self.params, &self.actor_cfg, &x)?;
        let mut out = Vec::with_capacity(slots.len());
        for (i, &slot) in slots.iter().enumerate() {
            // tanh squash to [-1, 1]
            let mu: Vec<f64> = y.row(i).iter().map(|&v| v.tanh()).collect();
            let action: Vec<f32> = if self.eval || self.noise_sigma == 0.0 {
                mu.iter().map(|&v| v as f32).collect()
            } else {
                let rng = self.streams.stream(slot);
                mu.iter()
                    .map(|&v| {
                        let eps: f64 = rng.sample(StandardNormal);
                        (v + self.noise_sigma * eps).clamp(-1.0, 1.0) as f32
                    })
                    .collect()
            };
            out.push(AgentSlotStep {
                action: Action::Continuous(action),
                info: vec![mu.iter().map(|&v| v as f32).collect()],
            });
        }
        Ok(out)
    }

    fn reset_slot(&mut self, _slot: usize) {}

    fn refresh(&mut self, version: u64, params: &ParamSet, _cum_env_steps: usize) {
        if version > self.version {
            self.params = params.clone();
            self.version = version;
        }
    }

    fn version(&self) -> u64 {
        self.version
    }

    fn set_eval(&mut self, eval: bool) {
        self.eval = eval;
    }

    fn fork(&self) -> Box<dyn Agent> {
        Box::new(QpgAgent {
            actor_cfg: self.actor_cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            noise_sigma: self.noise_sigma,
            streams: self.streams.fresh_copy(),
            eval: self.eval,
            master_seed: self.master_seed,
            realm: self.realm,
        })
    }

    fn fork_eval(&self) -> Box<dyn Agent> {
        let realm = match self.realm {
            Realm::Train { learner } => Realm::Eval { learner },
            eval => eval,
        };
        Box::new(QpgAgent {
            actor_cfg: self.actor_cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            noise_sigma: self.noise_sigma,
            streams: SlotStreams::new(self.master_seed, realm, StreamDomain::AgentAction),
            eval: true,
            master_seed: self.master_seed,
            realm,
        })
    }
}
