//! Parameter checkpoints, reusing the structured-array dump format:
//! spec-text header + raw leaf dump, one f64 leaf per named parameter.

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::Result;
use crate::sarray::{dump, load_bytes, Backing, ElemKind, SpecNode, StructArray, StructSpec};
use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

fn params_to_array(params: &ParamSet) -> Result<StructArray> {
    let fields: Vec<(String, SpecNode)> = params
        .iter()
        .map(|(name, t)| {
            (name.to_string(), SpecNode::Leaf { kind: ElemKind::F64, shape: t.shape().to_vec() })
        })
        .collect();
    let spec = StructSpec::new(SpecNode::Record { fields })?;
    let mut arr = StructArray::allocate(&spec, &[], Backing::Private)?;
    for (i, (_, t)) in params.iter().enumerate() {
        arr.set_cell_f64(i, 0, t.data());
    }
    Ok(arr)
}

pub fn save_params(params: &ParamSet, path: &Path) -> Result<()> {
    let arr = params_to_array(params)?;
    let mut w = BufWriter::new(File::create(path)?);
    dump(&arr, &mut w)
}

pub fn load_params(path: &Path) -> Result<ParamSet> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let arr = load_bytes(&bytes)?;
    let mut params = ParamSet::new();
    for (i, desc) in arr.spec().leaves().iter().enumerate() {
        let elem: usize = desc.shape.iter().product();
        let mut data = vec![0.0f64; elem];
        arr.cell_f64(i, 0, &mut data);
        params.push(&desc.path, Tensor::from_vec(&desc.shape, data));
    }
    Ok(params)
}
