//! Sample batch schema: `[Time, Batch]` leading dims over environment
//! fields, agent fields, and the prev-action/prev-reward alignment columns.

use crate::agent::Agent;
use crate::env::{Env, Space};
use crate::error::Result;
use crate::sarray::{ElemKind, SpecNode, StructSpec};

/// Cached leaf indices for collector writes.
#[derive(Clone, Debug)]
pub struct BatchLeaves {
    pub observation: usize,
    pub action: usize,
    pub reward: usize,
    pub done: usize,
    pub prev_action: usize,
    pub prev_reward: usize,
    pub env_info: Vec<usize>,
    pub agent_info: Vec<usize>,
}

fn action_node(space: &Space) -> SpecNode {
    match space {
        Space::Discrete { .. } => SpecNode::Leaf { kind: ElemKind::I64, shape: vec![] },
        Space::Box { low, .. } => SpecNode::Leaf { kind: ElemKind::F32, shape: vec![low.len()] },
        Space::Composite { .. } => panic!("composite action spaces are not supported"),
    }
}

/// Assemble the batch spec for an (environment, agent) pair.
pub fn build_batch_spec(env: &dyn Env, agent: &dyn Agent) -> Result<StructSpec> {
    let obs_dim = env.observation_dim();
    let act = action_node(&env.action_space());
    let fields = vec![
        (
            "observation".to_string(),
            SpecNode::Leaf { kind: ElemKind::F32, shape: vec![obs_dim] },
        ),
        ("action".to_string(), act.clone()),
        ("reward".to_string(), SpecNode::Leaf { kind: ElemKind::F32, shape: vec![] }),
        ("done".to_string(), SpecNode::Leaf { kind: ElemKind::Bool, shape: vec![] }),
        ("prev_action".to_string(), act),
        ("prev_reward".to_string(), SpecNode::Leaf { kind: ElemKind::F32, shape: vec![] }),
        ("env_info".to_string(), env.env_info_spec().root().clone()),
        ("agent_info".to_string(), agent.agent_info_spec().root().clone()),
    ];
    StructSpec::new(SpecNode::Record { fields })
}

impl BatchLeaves {
    pub fn from_spec(spec: &StructSpec) -> Self {
        let leaves = spec.leaves();
        let find = |path: &str| {
            leaves
                .iter()
                .position(|l| l.path == path)
                .unwrap_or_else(|| panic!("batch spec missing {path}"))
        };
        let prefixed = |prefix: &str| -> Vec<usize> {
            leaves
                .iter()
                .enumerate()
                .filter(|(_, l)| l.path.starts_with(prefix))
                .map(|(i, _)| i)
                .collect()
        };
        BatchLeaves {
            observation: find("observation"),
            action: find("action"),
            reward: find("reward"),
            done: find("done"),
            prev_action: find("prev_action"),
            prev_reward: find("prev_reward"),
            env_info: prefixed("env_info."),
            agent_info: prefixed("agent_info."),
        }
    }
}
