//! Owned leaf buffers and example values used to derive specs.

use super::spec::{ElemKind, SpecNode, StructSpec};
use crate::error::{Error, Result};

/// A dense, owned buffer of one element kind.
#[derive(Clone, Debug, PartialEq)]
pub enum LeafBuf {
    F32(Vec<f32>),
    F64(Vec<f64>),
    I64(Vec<i64>),
    Bool(Vec<bool>),
    U8(Vec<u8>),
}

impl LeafBuf {
    pub fn kind(&self) -> ElemKind {
        match self {
            LeafBuf::F32(_) => ElemKind::F32,
            LeafBuf::F64(_) => ElemKind::F64,
            LeafBuf::I64(_) => ElemKind::I64,
            LeafBuf::Bool(_) => ElemKind::Bool,
            LeafBuf::U8(_) => ElemKind::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LeafBuf::F32(v) => v.len(),
            LeafBuf::F64(v) => v.len(),
            LeafBuf::I64(v) => v.len(),
            LeafBuf::Bool(v) => v.len(),
            LeafBuf::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(kind: ElemKind, len: usize) -> Self {
        match kind {
            ElemKind::F32 => LeafBuf::F32(vec![0.0; len]),
            ElemKind::F64 => LeafBuf::F64(vec![0.0; len]),
            ElemKind::I64 => LeafBuf::I64(vec![0; len]),
            ElemKind::Bool => LeafBuf::Bool(vec![false; len]),
            ElemKind::U8 => LeafBuf::U8(vec![0; len]),
        }
    }

    /// Every value, widened to f64 (bool as 0/1). Used by oracles and dumps.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        match self {
            LeafBuf::F32(v) => v.iter().map(|&x| x as f64).collect(),
            LeafBuf::F64(v) => v.clone(),
            LeafBuf::I64(v) => v.iter().map(|&x| x as f64).collect(),
            LeafBuf::Bool(v) => v.iter().map(|&x| x as u8 as f64).collect(),
            LeafBuf::U8(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            LeafBuf::F32(v) => v.iter().all(|x| x.is_finite()),
            LeafBuf::F64(v) => v.iter().all(|x| x.is_finite()),
            _ => true,
        }
    }
}

/// A nested named record of scalar-or-array values, e.g. one environment
/// step's worth of fields. Used to derive buffer specs from live examples.
#[derive(Clone, Debug, PartialEq)]
pub enum StructValue {
    /// Leaf data with its per-element (trailing) shape.
    Leaf { buf: LeafBuf, shape: Vec<usize> },
    Record(Vec<(String, StructValue)>),
}

impl StructValue {
    pub fn scalar_f32(x: f32) -> Self {
        StructValue::Leaf { buf: LeafBuf::F32(vec![x]), shape: vec![] }
    }

    pub fn scalar_i64(x: i64) -> Self {
        StructValue::Leaf { buf: LeafBuf::I64(vec![x]), shape: vec![] }
    }

    pub fn scalar_bool(x: bool) -> Self {
        StructValue::Leaf { buf: LeafBuf::Bool(vec![x]), shape: vec![] }
    }

    pub fn vec_f32(xs: Vec<f32>) -> Self {
        let shape = vec![xs.len()];
        StructValue::Leaf { buf: LeafBuf::F32(xs), shape }
    }

    pub fn record(fields: Vec<(&str, StructValue)>) -> Self {
        StructValue::Record(fields.into_iter().map(|(n, v)| (n.to_string(), v)).collect())
    }
}

/// Derive a spec that mirrors an example value's structure, taking leaf
/// kinds and trailing shapes from the example.
pub fn build_spec_from_example(example: &StructValue) -> Result<StructSpec> {
    let node = node_from_example(example, "")?;
    StructSpec::new(node)
}

fn node_from_example(value: &StructValue, path: &str) -> Result<SpecNode> {
    match value {
        StructValue::Leaf { buf, shape } => {
            let expect: usize = shape.iter().product();
            if buf.len() != expect {
                return Err(Error::ShapeMismatch(format!(
                    "leaf `{path}` has {} values for shape {:?}",
                    buf.len(),
                    shape
                )));
            }
            if !buf.all_finite() {
                return Err(Error::NonFinite(format!("example leaf `{path}`")));
            }
            Ok(SpecNode::Leaf { kind: buf.kind(), shape: shape.clone() })
        }
        StructValue::Record(fields) => {
            let mut out = Vec::with_capacity(fields.len());
            for (i, (name, v)) in fields.iter().enumerate() {
                if name.is_empty() {
                    return Err(Error::EmptyField);
                }
                if fields[..i].iter().any(|(n, _)| n == name) {
                    return Err(Error::DuplicateField(name.clone()));
                }
                let child = node_from_example(v, name)?;
                out.push((name.clone(), child));
            }
            Ok(SpecNode::Record { fields: out })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrors_structure() {
        let example = StructValue::record(vec![
            ("obs", StructValue::vec_f32(vec![0.0; 4])),
            ("act", StructValue::scalar_i64(1)),
        ]);
        let spec = build_spec_from_example(&example).unwrap();
        let leaves = spec.leaves();
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].shape, vec![4]);
        assert_eq!(leaves[1].shape, Vec::<usize>::new());
        assert_eq!(leaves[1].kind, ElemKind::I64);
    }

    #[test]
    fn nesting_preserved() {
        let example = StructValue::record(vec![(
            "a",
            StructValue::record(vec![("b", StructValue::scalar_f32(0.0))]),
        )]);
        let spec = build_spec_from_example(&example).unwrap();
        assert_eq!(spec.leaves()[0].path, "a.b");
    }

    #[test]
    fn repeated_name_is_error() {
        let example = StructValue::Record(vec![
            ("x".to_string(), StructValue::scalar_f32(0.0)),
            ("x".to_string(), StructValue::scalar_f32(1.0)),
        ]);
        assert!(matches!(
            build_spec_from_example(&example),
            Err(Error::DuplicateField(_))
        ));
    }

    #[test]
    fn non_finite_example_rejected() {
        let example = StructValue::record(vec![("x", StructValue::scalar_f32(f32::NAN))]);
        assert!(matches!(build_spec_from_example(&example), Err(Error::NonFinite(_))));
    }
}
