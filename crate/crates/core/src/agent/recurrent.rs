//! Recurrent Q agent: carries per-slot hidden state across sampling steps,
//! records the pre-step state under agent_info, and consumes the full
//! (observation, previous action, previous reward) input.

use super::eps::{epsilon_greedy, EpsilonSpec};
use super::slot_rng::{Realm, SlotStreams, StreamDomain};
use super::{Agent, AgentSlotStep, SlotInputs};
use crate::env::Action;
use crate::error::Result;
use crate::nn::{qrnn_step, ParamSet, QRnnConfig, Tensor};
use crate::sarray::{ElemKind, SpecNode, StructSpec};

pub struct RecurrentQAgent {
    cfg: QRnnConfig,
    params: ParamSet,
    version: u64,
    eps: EpsilonSpec,
    batch_b: usize,
    streams: SlotStreams,
    hidden: Vec<Vec<f64>>, // per slot
    eval: bool,
    cum_env_steps: usize,
    master_seed: u64,
    realm: Realm,
}

impl RecurrentQAgent {
    pub fn new(
        cfg: QRnnConfig,
        params: ParamSet,
        eps: EpsilonSpec,
        master_seed: u64,
        realm: Realm,
        batch_b: usize,
    ) -> Self {
        RecurrentQAgent {
            cfg,
            params,
            version: 0,
            eps,
            batch_b,
            streams: SlotStreams::new(master_seed, realm, StreamDomain::AgentAction),
            hidden: Vec::new(),
            eval: false,
            cum_env_steps: 0,
            master_seed,
            realm,
        }
    }

    fn slot_hidden(&mut self, slot: usize) -> &mut Vec<f64> {
        if slot >= self.hidden.len() {
            let h = self.cfg.hidden_dim;
            self.hidden.resize_with(slot + 1, || vec![0.0; h]);
        }
        &mut self.hidden[slot]
    }

    /// Assemble the model input row: observation, previous action encoding,
    /// previous reward. Training rebuilds the identical row from stored
    /// columns.
    pub fn input_row(cfg: &QRnnConfig, inp: &SlotInputs<'_>) -> Vec<f64> {
        let mut row = Vec::with_capacity(cfg.input_dim);
        row.extend(inp.obs.iter().map(|&v| v as f64));
        row.extend(inp.prev_action.iter().map(|&v| v as f64));
        row.push(inp.prev_reward as f64);
        debug_assert_eq!(row.len(), cfg.input_dim);
        row
    }
}

impl Agent for RecurrentQAgent {
    fn agent_info_spec(&self) -> StructSpec {
        StructSpec::new(SpecNode::Record {
            fields: vec![
                (
                    "q".to_string(),
                    SpecNode::Leaf { kind: ElemKind::F32, shape: vec![self.cfg.n_actions] },
                ),
                (
                    "h".to_string(),
                    SpecNode::Leaf { kind: ElemKind::F32, shape: vec![self.cfg.hidden_dim] },
                ),
            ],
        })
        .unwrap()
    }

    fn act(&mut self, slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<AgentSlotStep>> {
        let mut out = Vec::with_capacity(slots.len());
        for (i, &slot) in slots.iter().enumerate() {
            let row = Self::input_row(&self.cfg, &inputs[i]);
            let h_pre: Vec<f64> = self.slot_hidden(slot).clone();
            let x = Tensor::from_vec(&[1, self.cfg.input_dim], row);
            let h = Tensor::from_vec(&[1, self.cfg.hidden_dim], h_pre.clone());
            let (q, h_next) = qrnn_step(&self.params, &x, &h);
            let eps = self.eps.eps(slot, self.batch_b, self.cum_env_steps, self.eval);
            let a = epsilon_greedy(q.row(0), eps, self.streams.stream(slot));
            *self.slot_hidden(slot) = h_next.data().to_vec();
            out.push(AgentSlotStep {
                action: Action::Discrete(a as i64),
                info: vec![
                    q.row(0).iter().map(|&v| v as f32).collect(),
                    h_pre.iter().map(|&v| v as f32).collect(),
                ],
            });
        }
        Ok(out)
    }

    fn reset_slot(&mut self, slot: usize) {
        self.slot_hidden(slot).iter_mut().for_each(|v| *v = 0.0);
    }

    fn refresh(&mut self, version: u64, params: &ParamSet, cum_env_steps: usize) {
        if version > self.version {
            self.params = params.clone();
            self.version = version;
        }
        self.cum_env_steps = cum_env_steps;
    }

    fn version(&self) -> u64 {
        self.version
    }

    fn set_eval(&mut self, eval: bool) {
        self.eval = eval;
    }

    fn fork(&self) -> Box<dyn Agent> {
        Box::new(RecurrentQAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            eps: self.eps.clone(),
            batch_b: self.batch_b,
            streams: self.streams.fresh_copy(),
            hidden: Vec::new(),
            eval: self.eval,
            cum_env_steps: self.cum_env_steps,
            master_seed: self.master_seed,
            realm: self.realm,
        })
    }

    fn fork_eval(&self) -> Box<dyn Agent> {
        let realm = match self.realm {
            Realm::Train { learner } => Realm::Eval { learner },
            eval => eval,
        };
        Box::new(RecurrentQAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            eps: self.eps.clone(),
            batch_b: self.batch_b,
            streams: SlotStreams::new(self.master_seed, realm, StreamDomain::AgentAction),
            hidden: Vec::new(),
            eval: true,
            cum_env_steps: self.cum_env_steps,
            master_seed: self.master_seed,
            realm,
        })
    }
}
