//! Named parameter/gradient sets with flat-addressable storage.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Ordered list of named tensors. Gradients mirror parameters exactly, so
/// the same container serves both roles.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

/// A gradient set; one-to-one shape correspondence with its `ParamSet`.
pub type GradSet = ParamSet;

impl ParamSet {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    pub fn push(&mut self, name: &str, t: Tensor) {
        debug_assert!(
            !self.entries.iter().any(|(n, _)| n == name),
            "duplicate parameter name {name}"
        );
        self.entries.push((name.to_string(), t));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        &mut self
            .entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
            .1
    }

    pub fn at(&self, i: usize) -> (&str, &Tensor) {
        let (n, t) = &self.entries[i];
        (n.as_str(), t)
    }

    pub fn at_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.entries[i].1
    }

    /// Same names and shapes, zero values.
    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape())))
                .collect(),
        }
    }

    pub fn shapes_match(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((an, at), (bn, bt))| an == bn && at.shape() == bt.shape())
    }

    pub fn flat_len(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Visit every scalar in declaration order.
    pub fn for_each_scalar(&self, mut f: impl FnMut(f64)) {
        for (_, t) in &self.entries {
            for &v in t.data() {
                f(v);
            }
        }
    }

    pub fn for_each_scalar_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (_, t) in &mut self.entries {
            for v in t.data_mut() {
                f(v);
            }
        }
    }

    /// `self += other * scale`, shape-checked.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) {
        assert!(self.shapes_match(other), "parameter shape mismatch");
        for (i, (_, t)) in self.entries.iter_mut().enumerate() {
            let src = other.entries[i].1.data();
            for (d, &s) in t.data_mut().iter_mut().zip(src) {
                *d += s * scale;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.for_each_scalar_mut(|v| *v *= s);
    }

    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_scalar(|v| acc += v * v);
        acc.sqrt()
    }

    /// Global gradient-norm clip; returns the pre-clip norm.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if max_norm > 0.0 && norm > max_norm {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_scalar(|v| ok &= v.is_finite());
        ok
    }

    /// Exact equality of names, shapes, and values.
    pub fn bit_equal(&self, other: &ParamSet) -> bool {
        self == other
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        Self::new()
    }
}

/// Elementwise arithmetic mean over shape-identical gradient sets; every
/// caller receives the identical result.
pub fn allreduce_mean(grad_sets: &[GradSet]) -> Result<GradSet> {
    let first = grad_sets
        .first()
        .ok_or_else(|| Error::ShapeMismatch("empty gradient list".into()))?;
    for g in &grad_sets[1..] {
        if !first.shapes_match(g) {
            return Err(Error::ShapeMismatch("gradient sets differ in shape".into()));
        }
    }
    let mut out = first.clone();
    for g in &grad_sets[1..] {
        out.add_scaled(g, 1.0);
    }
    out.scale(1.0 / grad_sets.len() as f64);
    Ok(out)
}
