//! Shared-trunk actor-critic network: policy logits + state value heads.

use super::params::{GradSet, ParamSet};
use super::tensor::{linear_backward, linear_forward, Nonlinearity, Tensor};
use crate::error::Result;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct AcConfig {
    pub obs_dim: usize,
    pub hidden: Vec<usize>,
    pub n_actions: usize,
    pub nonlinearity: Nonlinearity,
}

pub fn ac_init(cfg: &AcConfig, rng: &mut ChaCha8Rng) -> ParamSet {
    let mut params = ParamSet::new();
    let mut in_dim = cfg.obs_dim;
    for (i, &h) in cfg.hidden.iter().enumerate() {
        super::mlp::push_linear_pub(&mut params, &format!("l{i}"), h, in_dim, rng);
        in_dim = h;
    }
    super::mlp::push_linear_pub(&mut params, "pi", cfg.n_actions, in_dim, rng);
    super::mlp::push_linear_pub(&mut params, "v", 1, in_dim, rng);
    params
}

pub struct AcCache {
    x: Tensor,
    hidden_acts: Vec<Tensor>,
    trunk_out: Tensor,
}

/// Forward over `x: [n, obs_dim]`; returns `(logits [n, A], values [n])`.
pub fn ac_forward(params: &ParamSet, cfg: &AcConfig, x: &Tensor) -> Result<(Tensor, Tensor, AcCache)> {
    let mut h = x.clone();
    let mut hidden_acts = Vec::with_capacity(cfg.hidden.len());
    for i in 0..cfg.hidden.len() {
        let z = linear_forward(&h, params.get(&format!("l{i}.w")), params.get(&format!("l{i}.b")));
        h = cfg.nonlinearity.apply(&z);
        hidden_acts.push(h.clone());
    }
    let trunk_out = h;
    let logits = linear_forward(&trunk_out, params.get("pi.w"), params.get("pi.b"));
    let values2 = linear_forward(&trunk_out, params.get("v.w"), params.get("v.b"));
    let n = x.shape()[0];
    let values = values2.reshaped(&[n]);
    logits.ensure_finite("policy logits")?;
    values.ensure_finite("state values")?;
    Ok((logits, values, AcCache { x: x.clone(), hidden_acts, trunk_out }))
}

/// Backward from head gradients; returns parameter gradients.
pub fn ac_backward(
    params: &ParamSet,
    cfg: &AcConfig,
    cache: &AcCache,
    dlogits: &Tensor,
    dvalues: &Tensor,
) -> GradSet {
    let n = cache.x.shape()[0];
    let mut grads = params.zeros_like();
    let (dw_pi, db_pi, dx_pi) = linear_backward(&cache.trunk_out, params.get("pi.w"), dlogits);
    let dv2 = dvalues.clone().reshaped(&[n, 1]);
    let (dw_v, db_v, dx_v) = linear_backward(&cache.trunk_out, params.get("v.w"), &dv2);
    *grads.get_mut("pi.w") = dw_pi;
    *grads.get_mut("pi.b") = db_pi;
    *grads.get_mut("v.w") = dw_v;
    *grads.get_mut("v.b") = db_v;
    let mut d_trunk = dx_pi;
    d_trunk.data_mut().iter_mut().zip(dx_v.data()).for_each(|(d, &s)| *d += s);

    for i in (0..cfg.hidden.len()).rev() {
        let act = &cache.hidden_acts[i];
        let dz = cfg.nonlinearity.backward(act, &d_trunk);
        let input = if i == 0 { &cache.x } else { &cache.hidden_acts[i - 1] };
        let (dw, db, dx) = linear_backward(input, params.get(&format!("l{i}.w")), &dz);
        *grads.get_mut(&format!("l{i}.w")) = dw;
        *grads.get_mut(&format!("l{i}.b")) = db;
        d_trunk = dx;
    }
    grads
}
