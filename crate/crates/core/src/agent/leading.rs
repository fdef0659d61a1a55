//! Leading-dimension inference: the same model serves a single example,
//! a `[B, ..]` batch, or a `[T, B, ..]` time-batch. Inputs are flattened for
//! the forward pass and outputs restored to the caller's layout.

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeadDims {
    pub t: Option<usize>,
    pub b: Option<usize>,
}

impl LeadDims {
    pub fn flat(&self) -> usize {
        self.t.unwrap_or(1) * self.b.unwrap_or(1)
    }
}

/// Infer `[T, B]` presence from the input rank given the known trailing
/// rank of the observation, returning the flattened `[N, trailing...]` view.
pub fn infer_leading_dims(x: &Tensor, trailing_rank: usize) -> Result<(LeadDims, Tensor)> {
    let rank = x.shape().len();
    if rank < trailing_rank || rank > trailing_rank + 2 {
        return Err(Error::DimMismatch(format!(
            "input rank {rank} outside [{trailing_rank}, {}]",
            trailing_rank + 2
        )));
    }
    let lead_rank = rank - trailing_rank;
    let lead = match lead_rank {
        0 => LeadDims { t: None, b: None },
        1 => LeadDims { t: None, b: Some(x.shape()[0]) },
        _ => LeadDims { t: Some(x.shape()[0]), b: Some(x.shape()[1]) },
    };
    let trailing: usize = x.shape()[lead_rank..].iter().product();
    let flat = x.clone().reshaped(&[lead.flat(), trailing]);
    Ok((lead, flat))
}

/// Restore a flattened `[N, out...]` output to the input's leading layout.
pub fn restore_leading_dims(y: Tensor, lead: &LeadDims) -> Tensor {
    let out_trailing = &y.shape()[1..].to_vec();
    let mut shape = Vec::new();
    if let Some(t) = lead.t {
        shape.push(t);
    }
    if let Some(b) = lead.b {
        shape.push(b);
    }
    shape.extend(out_trailing.iter().filter(|&&d| d != 1 || out_trailing.len() > 1));
    // a [N, 1] output restores to the bare leading shape
    if shape.is_empty() {
        shape.push(1);
    }
    y.reshaped(&shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_leading_dims() {
        let x = Tensor::zeros(&[4]);
        let (lead, flat) = infer_leading_dims(&x, 1).unwrap();
        assert_eq!(lead, LeadDims { t: None, b: None });
        assert_eq!(flat.shape(), &[1, 4]);
    }

    #[test]
    fn batch_only() {
        let x = Tensor::zeros(&[5, 4]);
        let (lead, flat) = infer_leading_dims(&x, 1).unwrap();
        assert_eq!(lead, LeadDims { t: None, b: Some(5) });
        assert_eq!(flat.shape(), &[5, 4]);
    }

    #[test]
    fn time_batch_round_trip() {
        let x = Tensor::zeros(&[7, 5, 4]);
        let (lead, flat) = infer_leading_dims(&x, 1).unwrap();
        assert_eq!(lead, LeadDims { t: Some(7), b: Some(5) });
        assert_eq!(flat.shape(), &[35, 4]);
        // a value head output [N, 1] restores to [7, 5]
        let y = Tensor::zeros(&[35, 1]);
        assert_eq!(restore_leading_dims(y, &lead).shape(), &[7, 5]);
        // a q head output [N, 3] restores to [7, 5, 3]
        let q = Tensor::zeros(&[35, 3]);
        assert_eq!(restore_leading_dims(q, &lead).shape(), &[7, 5, 3]);
    }

    #[test]
    fn rank_outside_cases_rejected() {
        let x = Tensor::zeros(&[2, 2, 2, 4]);
        assert!(infer_leading_dims(&x, 1).is_err());
    }
}
