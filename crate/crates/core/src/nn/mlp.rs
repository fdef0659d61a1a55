//! Multi-layer perceptron with reverse-mode gradients, plus the dueling and
//! distributional (atom) head variants used by the value-learning family.

use super::params::{GradSet, ParamSet};
use super::tensor::{linear_backward, linear_forward, Nonlinearity, Tensor};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub nonlinearity: Nonlinearity,
    /// Split the head into value and advantage streams, recombined as
    /// `q = v + a - mean(a)`.
    pub dueling: bool,
    /// Distributional atom count; the head then emits
    /// `output_dim * atoms` logits laid out action-major.
    pub atoms: Option<usize>,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize) -> Self {
        MlpConfig {
            input_dim,
            hidden,
            output_dim,
            nonlinearity: Nonlinearity::Tanh,
            dueling: false,
            atoms: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidConfig("mlp dims must be positive".into()));
        }
        if self.atoms == Some(0) {
            return Err(Error::InvalidConfig("atom count must be positive".into()));
        }
        Ok(())
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.unwrap_or(1)
    }

    /// Width of the forward output (actions × atoms).
    pub fn out_width(&self) -> usize {
        self.output_dim * self.atom_count()
    }
}

/// Uniform ±1/sqrt(fan_in) initialization, deterministic in the rng stream.
pub fn mlp_init(cfg: &MlpConfig, rng: &mut ChaCha8Rng) -> ParamSet {
    let mut params = ParamSet::new();
    let mut in_dim = cfg.input_dim;
    for (i, &h) in cfg.hidden.iter().enumerate() {
        push_linear(&mut params, &format!("l{i}"), h, in_dim, rng);
        in_dim = h;
    }
    if cfg.dueling {
        push_linear(&mut params, "v", cfg.atom_count(), in_dim, rng);
        push_linear(&mut params, "a", cfg.out_width(), in_dim, rng);
    } else {
        push_linear(&mut params, "out", cfg.out_width(), in_dim, rng);
    }
    params
}

/// Shared by the composite network builders in this module's siblings.
pub(crate) fn push_linear_pub(
    params: &mut ParamSet,
    name: &str,
    out: usize,
    inp: usize,
    rng: &mut ChaCha8Rng,
) {
    push_linear(params, name, out, inp, rng)
}

fn push_linear(params: &mut ParamSet, name: &str, out: usize, inp: usize, rng: &mut ChaCha8Rng) {
    let bound = 1.0 / (inp as f64).sqrt();
    let w: Vec<f64> = (0..out * inp).map(|_| rng.gen_range(-bound..bound)).collect();
    let b: Vec<f64> = (0..out).map(|_| rng.gen_range(-bound..bound)).collect();
    params.push(&format!("{name}.w"), Tensor::from_vec(&[out, inp], w));
    params.push(&format!("{name}.b"), Tensor::from_vec(&[out], b));
}

/// Activations retained for the backward pass.
pub struct MlpCache {
    x: Tensor,
    hidden_acts: Vec<Tensor>,
    trunk_out: Tensor,
    adv: Option<Tensor>,
}

/// Forward over a flattened batch `x: [n, input_dim]`; leading-dimension
/// handling lives with the agents.
pub fn mlp_forward(params: &ParamSet, cfg: &MlpConfig, x: &Tensor) -> Result<(Tensor, MlpCache)> {
    if x.shape().len() != 2 || x.shape()[1] != cfg.input_dim {
        return Err(Error::DimMismatch(format!(
            "mlp input shape {:?}, expected [n, {}]",
            x.shape(),
            cfg.input_dim
        )));
    }
    let mut h = x.clone();
    let mut hidden_acts = Vec::with_capacity(cfg.hidden.len());
    for i in 0..cfg.hidden.len() {
        let z = linear_forward(&h, params.get(&format!("l{i}.w")), params.get(&format!("l{i}.b")));
        h = cfg.nonlinearity.apply(&z);
        hidden_acts.push(h.clone());
    }
    let trunk_out = h;
    let (y, adv) = if cfg.dueling {
        let v = linear_forward(&trunk_out, params.get("v.w"), params.get("v.b"));
        let a = linear_forward(&trunk_out, params.get("a.w"), params.get("a.b"));
        (dueling_combine(&v, &a, cfg.output_dim, cfg.atom_count()), Some(a))
    } else {
        (linear_forward(&trunk_out, params.get("out.w"), params.get("out.b")), None)
    };
    y.ensure_finite("mlp output")?;
    Ok((y, MlpCache { x: x.clone(), hidden_acts, trunk_out, adv }))
}

/// `q[n, act, atom] = v[n, atom] + a[n, act, atom] - mean_act a[n, ·, atom]`.
pub fn dueling_combine(v: &Tensor, a: &Tensor, n_actions: usize, atoms: usize) -> Tensor {
    let n = v.shape()[0];
    assert_eq!(v.shape()[1], atoms);
    assert_eq!(a.shape()[1], n_actions * atoms);
    let mut q = Tensor::zeros(&[n, n_actions * atoms]);
    for i in 0..n {
        let vi = v.row(i);
        let ai = a.row(i);
        let qi = q.row_mut(i);
        for k in 0..atoms {
            let mut mean = 0.0;
            for act in 0..n_actions {
                mean += ai[act * atoms + k];
            }
            mean /= n_actions as f64;
            for act in 0..n_actions {
                qi[act * atoms + k] = vi[k] + ai[act * atoms + k] - mean;
            }
        }
    }
    q
}

/// Backward pass; returns parameter gradients and the input gradient.
pub fn mlp_backward(
    params: &ParamSet,
    cfg: &MlpConfig,
    cache: &MlpCache,
    upstream: &Tensor,
) -> Result<(GradSet, Tensor)> {
    let n = cache.x.shape()[0];
    if upstream.shape() != [n, cfg.out_width()] {
        return Err(Error::DimMismatch(format!(
            "upstream shape {:?}, expected [{n}, {}]",
            upstream.shape(),
            cfg.out_width()
        )));
    }
    let mut grads = params.zeros_like();

    let mut d_trunk = if cfg.dueling {
        let atoms = cfg.atom_count();
        let n_actions = cfg.output_dim;
        // split upstream into value/advantage gradients
        let mut dv = Tensor::zeros(&[n, atoms]);
        let mut da = Tensor::zeros(&[n, n_actions * atoms]);
        for i in 0..n {
            let up = upstream.row(i);
            for k in 0..atoms {
                let mut sum = 0.0;
                for act in 0..n_actions {
                    sum += up[act * atoms + k];
                }
                dv.row_mut(i)[k] = sum;
                let mean = sum / n_actions as f64;
                for act in 0..n_actions {
                    da.row_mut(i)[act * atoms + k] = up[act * atoms + k] - mean;
                }
            }
        }
        let (dw_v, db_v, dx_v) = linear_backward(&cache.trunk_out, params.get("v.w"), &dv);
        let (dw_a, db_a, dx_a) = linear_backward(&cache.trunk_out, params.get("a.w"), &da);
        *grads.get_mut("v.w") = dw_v;
        *grads.get_mut("v.b") = db_v;
        *grads.get_mut("a.w") = dw_a;
        *grads.get_mut("a.b") = db_a;
        let mut dx = dx_v;
        dx.data_mut().iter_mut().zip(dx_a.data()).for_each(|(d, &s)| *d += s);
        dx
    } else {
        let (dw, db, dx) = linear_backward(&cache.trunk_out, params.get("out.w"), upstream);
        *grads.get_mut("out.w") = dw;
        *grads.get_mut("out.b") = db;
        dx
    };

    for i in (0..cfg.hidden.len()).rev() {
        let act = &cache.hidden_acts[i];
        let dz = cfg.nonlinearity.backward(act, &d_trunk);
        let input = if i == 0 { &cache.x } else { &cache.hidden_acts[i - 1] };
        let (dw, db, dx) = linear_backward(input, params.get(&format!("l{i}.w")), &dz);
        *grads.get_mut(&format!("l{i}.w")) = dw;
        *grads.get_mut(&format!("l{i}.b")) = db;
        d_trunk = dx;
    }
    let _ = &cache.adv;
    Ok((grads, d_trunk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_params_give_zero_output() {
        let cfg = MlpConfig::new(3, vec![4], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = mlp_init(&cfg, &mut rng).zeros_like();
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.1, -0.7]);
        let (y, _) = mlp_forward(&params, &cfg, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_single_layer() {
        let cfg = MlpConfig::new(2, vec![], 2);
        let mut params = ParamSet::new();
        params.push("out.w", Tensor::from_vec(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]));
        params.push("out.b", Tensor::zeros(&[2]));
        let x = Tensor::from_vec(&[1, 2], vec![3.0, -4.0]);
        let (y, _) = mlp_forward(&params, &cfg, &x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn forward_matches_straight_line_reference() {
        // independent straight-line evaluation of a 2-layer tanh MLP
        let cfg = MlpConfig::new(2, vec![3], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = mlp_init(&cfg, &mut rng);
        let x = vec![0.3, -1.2];
        let (y, _) = mlp_forward(&params, &cfg, &Tensor::from_vec(&[1, 2], x.clone())).unwrap();

        let w0 = params.get("l0.w");
        let b0 = params.get("l0.b");
        let w1 = params.get("out.w");
        let b1 = params.get("out.b");
        let mut h = [0.0f64; 3];
        for o in 0..3 {
            let mut acc = b0.data()[o];
            for k in 0..2 {
                acc += w0.row(o)[k] * x[k];
            }
            h[o] = acc.tanh();
        }
        for o in 0..2 {
            let mut acc = b1.data()[o];
            for k in 0..3 {
                acc += w1.row(o)[k] * h[k];
            }
            assert!((y.data()[o] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let cfg = MlpConfig::new(3, vec![4, 4], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = mlp_init(&cfg, &mut rng);
        let x = Tensor::from_vec(&[2, 3], vec![0.1; 6]);
        let (_, cache) = mlp_forward(&params, &cfg, &x).unwrap();
        let (grads, dx) = mlp_backward(&params, &cfg, &cache, &Tensor::zeros(&[2, 2])).unwrap();
        assert!(grads.l2_norm() == 0.0);
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_by_one_linear_grad_is_input() {
        // y = w x + b, loss = y  =>  dw = x, db = 1, dx = w
        let cfg = MlpConfig::new(1, vec![], 1);
        let mut params = ParamSet::new();
        params.push("out.w", Tensor::from_vec(&[1, 1], vec![2.5]));
        params.push("out.b", Tensor::from_vec(&[1], vec![0.1]));
        let x = Tensor::from_vec(&[1, 1], vec![3.0]);
        let (_, cache) = mlp_forward(&params, &cfg, &x).unwrap();
        let up = Tensor::from_vec(&[1, 1], vec![1.0]);
        let (grads, dx) = mlp_backward(&params, &cfg, &cache, &up).unwrap();
        assert_eq!(grads.get("out.w").data(), &[3.0]);
        assert_eq!(grads.get("out.b").data(), &[1.0]);
        assert_eq!(dx.data(), &[2.5]);
    }

    #[test]
    fn dueling_identifiability() {
        // constant advantage leaves q = v for all actions; adding a constant
        // to all advantages leaves q unchanged
        let v = Tensor::from_vec(&[1, 1], vec![2.0]);
        let a = Tensor::from_vec(&[1, 2], vec![1.0, -1.0]);
        let q = dueling_combine(&v, &a, 2, 1);
        assert_eq!(q.data(), &[3.0, 1.0]);

        let a_const = Tensor::from_vec(&[1, 2], vec![5.0, 5.0]);
        let q2 = dueling_combine(&v, &a_const, 2, 1);
        assert_eq!(q2.data(), &[2.0, 2.0]);

        let a_shift = Tensor::from_vec(&[1, 2], vec![1.0 + 9.0, -1.0 + 9.0]);
        let q3 = dueling_combine(&v, &a_shift, 2, 1);
        assert_eq!(q3.data(), q.data());
    }
}
