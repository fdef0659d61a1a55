//! Feed-forward Q-value agent with epsilon-greedy exploration. Handles the
//! plain, dueling, and distributional (categorical) heads.

use super::eps::{epsilon_greedy, EpsilonSpec};
use super::slot_rng::{Realm, SlotStreams, StreamDomain};
use super::{obs_matrix, Agent, AgentSlotStep, SlotInputs};
use crate::env::Action;
use crate::error::Result;
use crate::nn::{mlp_forward, softmax, MlpConfig, ParamSet};
use crate::sarray::{ElemKind, SpecNode, StructSpec};

pub struct DqnAgent {
    cfg: MlpConfig,
    params: ParamSet,
    version: u64,
    eps: EpsilonSpec,
    batch_b: usize,
    streams: SlotStreams,
    /// Atom support for expected-value action selection (categorical head).
    support: Option<Vec<f64>>,
    eval: bool,
    cum_env_steps: usize,
    master_seed: u64,
    realm: Realm,
}

impl DqnAgent {
    pub fn new(
        cfg: MlpConfig,
        params: ParamSet,
        eps: EpsilonSpec,
        support: Option<Vec<f64>>,
        master_seed: u64,
        realm: Realm,
        batch_b: usize,
    ) -> Self {
        if let Some(z) = &support {
            assert_eq!(z.len(), cfg.atom_count());
        }
        DqnAgent {
            cfg,
            params,
            version: 0,
            eps,
            batch_b,
            streams: SlotStreams::new(master_seed, realm, StreamDomain::AgentAction),
            support,
            eval: false,
            cum_env_steps: 0,
            master_seed,
            realm,
        }
    }

    fn n_actions(&self) -> usize {
        self.cfg.output_dim
    }

    /// Expected q per action from the head output row.
    fn q_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.support {
            None => row.to_vec(),
            Some(z) => {
                let atoms = z.len();
                (0..self.n_actions())
                    .map(|a| {
                        let probs = softmax(&row[a * atoms..(a + 1) * atoms]);
                        probs.iter().zip(z).map(|(&p, &zv)| p * zv).sum()
                    })
                    .collect()
            }
        }
    }
}

impl Agent for DqnAgent {
    fn agent_info_spec(&self) -> StructSpec {
        StructSpec::new(SpecNode::Record {
            fields: vec![(
                "q".to_string(),
                SpecNode::Leaf { kind: ElemKind::F32, shape: vec![self.n_actions()] },
            )],
        })
        .unwrap()
    }

    fn act(&mut self, slots: &[usize], inputs: &[SlotInputs<'_>]) -> Result<Vec<AgentSlotStep>> {
        let x = obs_matrix(inputs);
        let (y, _) = mlp_forward(&self.params, &self.cfg, &x)?;
        let mut out = Vec::with_capacity(slots.len());
        for (i, &slot) in slots.iter().enumerate() {
            let q = self.q_row(y.row(i));
            let eps = self.eps.eps(slot, self.batch_b, self.cum_env_steps, self.eval);
            let a = epsilon_greedy(&q, eps, self.streams.stream(slot));
            out.push(AgentSlotStep {
                action: Action::Discrete(a as i64),
                info: vec![q.iter().map(|&v| v as f32).collect()],
            });
        }
        Ok(out)
    }

    fn reset_slot(&mut self, _slot: usize) {}

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
        Box::new(DqnAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            eps: self.eps.clone(),
            batch_b: self.batch_b,
            streams: self.streams.fresh_copy(),
            support: self.support.clone(),
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
        let mut agent = DqnAgent {
            cfg: self.cfg.clone(),
            params: self.params.clone(),
            version: self.version,
            eps: self.eps.clone(),
            batch_b: self.batch_b,
            streams: SlotStreams::new(self.master_seed, realm, StreamDomain::AgentAction),
            support: self.support.clone(),
            eval: true,
            cum_env_steps: self.cum_env_steps,
            master_seed: self.master_seed,
            realm,
        };
        agent.set_eval(true);
        Box::new(agent)
    }
}
