//! Adam with bias correction.

use super::params::{GradSet, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    m: ParamSet,
    v: ParamSet,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(params: &ParamSet, hyper: AdamHyper) -> Self {
        AdamState { step: 0, m: params.zeros_like(), v: params.zeros_like(), hyper }
    }
}

/// One Adam step in place; increments the step count.
pub fn adam_update(params: &mut ParamSet, grads: &GradSet, state: &mut AdamState) -> Result<()> {
    if !params.shapes_match(grads) {
        return Err(Error::ShapeMismatch("params/grads shape mismatch".into()));
    }
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    state.step += 1;
    let t = state.step as i32;
    let h = state.hyper;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads.at(i).1.data();
        let m = state.m.at_mut(i).data_mut();
        let v = state.v.at_mut(i).data_mut();
        let p = params.at_mut(i).data_mut();
        for k in 0..p.len() {
            m[k] = h.beta1 * m[k] + (1.0 - h.beta1) * g[k];
            v[k] = h.beta2 * v[k] + (1.0 - h.beta2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            p[k] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    fn params(vals: &[f64]) -> ParamSet {
        let mut p = ParamSet::new();
        p.push("w", Tensor::from_vec(&[vals.len()], vals.to_vec()));
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2  =>  delta = -lr * g / (|g| + eps)
        let mut p = params(&[0.0, 1.0, -2.0]);
        let g = params(&[0.1, 0.1, 0.1]);
        let mut st = AdamState::new(&p, AdamHyper { lr: 1e-3, ..Default::default() });
        adam_update(&mut p, &g, &mut st).unwrap();
        for (i, &orig) in [0.0, 1.0, -2.0].iter().enumerate() {
            let delta = p.get("w").data()[i] - orig;
            assert!((delta + 1e-3).abs() < 1e-9, "delta = {delta}");
        }
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_grad_keeps_params() {
        let mut p = params(&[3.0, -1.0]);
        let g = p.zeros_like();
        let mut st = AdamState::new(&p, AdamHyper::default());
        adam_update(&mut p, &g, &mut st).unwrap();
        assert_eq!(p.get("w").data(), &[3.0, -1.0]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn two_steps_match_scalar_reference() {
        let (lr, b1, b2, eps) = (0.01, 0.9, 0.999, 1e-8);
        let mut p = params(&[1.0]);
        let mut st = AdamState::new(&p, AdamHyper { lr, beta1: b1, beta2: b2, eps });
        let gs = [0.3, -0.2];

        // scalar reference trace
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        for (t, &g) in gs.iter().enumerate() {
            let t = (t + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }

        for &g in &gs {
            adam_update(&mut p, &params(&[g]), &mut st).unwrap();
        }
        assert!((p.get("w").data()[0] - x).abs() < 1e-15);
    }

    #[test]
    fn non_finite_grads_rejected() {
        let mut p = params(&[1.0]);
        let g = params(&[f64::NAN]);
        let mut st = AdamState::new(&p, AdamHyper::default());
        assert!(adam_update(&mut p, &g, &mut st).is_err());
    }
}
