//! Stochastic categorical policy agent with a state-value head.

use super::slot_rng::{Realm, SlotStreams, StreamDomain};
use super::{obs_matrix, Agent, AgentSlotStep, SlotInputs};
use crate::env::Action;
use crate::error::Result;
use crate::nn::{ac_forward, AcConfig, Categorical, ParamSet};
use crate::sarray::{ElemKind, SpecNode, StructSpec};

pub struct PgAgent {
    cfg: AcConfig,
    params: ParamSet,
    version: u64,
    streams: SlotStreams,
    eval: bool,
    /// Greedy (argmax) action selection during evaluation.
    pub eval_greedy: bool,
    master_seed: u64,
    realm: Realm,
}

impl PgAgent {
    pub fn new(cfg: AcConfig, params: ParamSet, master_seed: u64, realm: Realm) -> Self {
        PgAgent {
            cfg,
            params,
            version: 0,
            streams: SlotStreams::new(master_seed, realm, StreamDomain::AgentAction),
            eval: false,
            eval_greedy: true,
            master_seed,
            realm,
        }
    }
}

impl Agent for PgAgent {
    fn agent_info_spec(&self) -> StructSpec {
        StructSpec::new(SpecNode::Record {
            fields: vec![
                (
                    "logits".to_string(),
                    SpecNode::Leaf { kind: ElemKind::F32, shape: vec![self.cfg.n_actions] },
                ),
                ("value".to_string(), SpecNode::Leaf { kind: ElemKind::F32, shape: vec![] }),
                ("log_prob".to_string(), SpecNode::Leaf { kind: ElemKind::F32, shape: vec![] }),
            ],
        })
        .unwrap()
    }

    fn act(&mut self, slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<AgentSlotStep>> {
        let x = obs_matrix(inputs);
        let (logits, values, _) = ac_forward(&self.params, &self.cfg, &x)?;
        let mut out = Vec::with_capacity(slots.len());
        for (i, &slot) in slots.iter().enumerate() {
            let row = logits.row(i);
            let dist = Categorical::from_logits(row)?;
            let a = if self.eval && self.eval_greedy {
                super::eps::argmax(row)
            } else {
                dist.sample(self.streams.stream(slot))
            };
            out.push(AgentSlotStep {
                action: Action::Discrete(a as i64),
                info: vec![
                    row.iter().map(|&v| v as f32).collect(),
                    vec![values.data()[i] as f32],
                    vec![dist.log_prob(a) as f32],
                ],
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
        Box::new(PgAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            streams: self.streams.fresh_copy(),
            eval: self.eval,
            eval_greedy: self.eval_greedy,
            master_seed: self.master_seed,
            realm: self.realm,
        })
    }

    fn fork_eval(&self) -> Box<dyn Agent> {
        let realm = match self.realm {
            Realm::Train { learner } => Realm::Eval { learner },
            eval => eval,
        };
        Box::new(PgAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            streams: SlotStreams::new(self.master_seed, realm, StreamDomain::AgentAction),
            eval: true,
            eval_greedy: self.eval_greedy,
            master_seed: self.master_seed,
            realm,
        })
    }

    fn wants_bootstrap(&self) -> bool {
        true
    }

    fn state_values(&mut self, _slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<f64>> {
        let x = obs_matrix(inputs);
        let (_, values, _) = ac_forward(&self.params, &self.cfg, &x)?;
        Ok(values.data().to_vec())
    }
}
