//! Observation/action space descriptions shared between environments and
//! agents.

use crate::sarray::{ElemKind, SpecNode, StructSpec, StructValue};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// Integer actions/values in `[0, n)`.
    Discrete { n: usize },
    /// Bounded continuous values; shape is the bound vector length.
    Box { low: Vec<f32>, high: Vec<f32> },
    /// Named sub-spaces; samples mirror the tree (pairs with StructSpec).
    Composite { fields: Vec<(String, Space)> },
}

impl Space {
    pub fn discrete(n: usize) -> Space {
        Space::Discrete { n }
    }

    pub fn uniform_box(low: f32, high: f32, dim: usize) -> Space {
        Space::Box { low: vec![low; dim], high: vec![high; dim] }
    }

    /// Flattened scalar count for Box/Discrete leaves (1 for Discrete).
    pub fn flat_dim(&self) -> usize {
        match self {
            Space::Discrete { .. } => 1,
            Space::Box { low, .. } => low.len(),
            Space::Composite { fields } => fields.iter().map(|(_, s)| s.flat_dim()).sum(),
        }
    }

    /// The structure spec a sample of this space conforms to.
    pub fn spec(&self) -> StructSpec {
        fn node(space: &Space) -> SpecNode {
            match space {
                Space::Discrete { .. } => SpecNode::Leaf { kind: ElemKind::I64, shape: vec![] },
                Space::Box { low, .. } => {
                    SpecNode::Leaf { kind: ElemKind::F32, shape: vec![low.len()] }
                }
                Space::Composite { fields } => SpecNode::Record {
                    fields: fields.iter().map(|(n, s)| (n.clone(), node(s))).collect(),
                },
            }
        }
        StructSpec::new(node(self)).expect("space field names are unique")
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> StructValue {
        match self {
            Space::Discrete { n } => StructValue::scalar_i64(rng.gen_range(0..*n) as i64),
            Space::Box { low, high } => StructValue::vec_f32(
                low.iter().zip(high).map(|(&l, &h)| rng.gen_range(l..=h)).collect(),
            ),
            Space::Composite { fields } => StructValue::Record(
                fields.iter().map(|(n, s)| (n.clone(), s.sample(rng))).collect(),
            ),
        }
    }

    pub fn contains(&self, value: &StructValue) -> bool {
        match (self, value) {
            (Space::Discrete { n }, StructValue::Leaf { buf, .. }) => match buf {
                crate::sarray::LeafBuf::I64(v) => {
                    v.len() == 1 && v[0] >= 0 && (v[0] as usize) < *n
                }
                _ => false,
            },
            (Space::Box { low, high }, StructValue::Leaf { buf, .. }) => match buf {
                crate::sarray::LeafBuf::F32(v) => {
                    v.len() == low.len()
                        && v.iter().zip(low.iter().zip(high)).all(|(&x, (&l, &h))| x >= l && x <= h)
                }
                _ => false,
            },
            (Space::Composite { fields }, StructValue::Record(vals)) => {
                fields.len() == vals.len()
                    && fields
                        .iter()
                        .zip(vals)
                        .all(|((fname, fspace), (vname, v))| fname == vname && fspace.contains(v))
            }
            _ => false,
        }
    }
}
