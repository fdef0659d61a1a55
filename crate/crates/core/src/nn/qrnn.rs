//! Recurrent Q network: tanh RNN cell plus a linear Q head, with the
//! sampling step and the unrolled training pass sharing one code path.

use super::params::{GradSet, ParamSet};
use super::rnn::{
    rnn_backward_sequence, rnn_forward_sequence, rnn_init, rnn_step, RnnCache, RnnConfig, RnnState,
};
use super::tensor::{linear_backward, linear_forward, Tensor};
use crate::error::Result;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
pub struct QRnnConfig {
    /// Model input width: observation (+ prev-action one-hot + prev-reward).
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_actions: usize,
}

pub fn qrnn_init(cfg: &QRnnConfig, rng: &mut ChaCha8Rng) -> ParamSet {
    let mut params = rnn_init(
        &RnnConfig { input_dim: cfg.input_dim, hidden_dim: cfg.hidden_dim },
        rng,
    );
    super::mlp::push_linear_pub(&mut params, "head", cfg.n_actions, cfg.hidden_dim, rng);
    params
}

/// One sampling step: advance the hidden state and emit q values.
pub fn qrnn_step(params: &ParamSet, x: &Tensor, h: &Tensor) -> (Tensor, Tensor) {
    let h_next = rnn_step(params, x, h);
    let q = linear_forward(&h_next, params.get("head.w"), params.get("head.b"));
    (q, h_next)
}

pub struct QRnnCache {
    rnn: RnnCache,
    y: Tensor, // [T, B, H] hidden outputs
}

/// Unrolled forward over `[T, B, input]`; `resets` zeroes the carried state
/// at episode starts exactly as the sampling path does.
pub fn qrnn_forward_seq(
    params: &ParamSet,
    x_seq: &Tensor,
    h0: &RnnState,
    resets: Option<&[bool]>,
) -> Result<(Tensor, RnnState, QRnnCache)> {
    let (y, h_t, rnn_cache) = rnn_forward_sequence(params, x_seq, h0, resets)?;
    let dims = y.shape().to_vec();
    let (t_len, batch, hidden) = (dims[0], dims[1], dims[2]);
    let flat = y.clone().reshaped(&[t_len * batch, hidden]);
    let q = linear_forward(&flat, params.get("head.w"), params.get("head.b"));
    let n_actions = q.shape()[1];
    Ok((
        q.reshaped(&[t_len, batch, n_actions]),
        h_t,
        QRnnCache { rnn: rnn_cache, y },
    ))
}

/// Backward from per-step q gradients `[T, B, A]`.
pub fn qrnn_backward_seq(params: &ParamSet, cache: &QRnnCache, dq: &Tensor) -> GradSet {
    let dims = cache.y.shape().to_vec();
    let (t_len, batch, hidden) = (dims[0], dims[1], dims[2]);
    let n_actions = dq.shape()[2];
    let flat_y = cache.y.clone().reshaped(&[t_len * batch, hidden]);
    let flat_dq = dq.clone().reshaped(&[t_len * batch, n_actions]);
    let (dw_head, db_head, dy_flat) = linear_backward(&flat_y, params.get("head.w"), &flat_dq);
    let dy = dy_flat.reshaped(&[t_len, batch, hidden]);
    let (mut grads, _dh0, _dx) = rnn_backward_sequence(params, &cache.rnn, &dy);
    *grads.get_mut("head.w") = dw_head;
    *grads.get_mut("head.b") = db_head;
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::finite_diff_check;
    use rand::SeedableRng;

    #[test]
    fn seq_forward_matches_stepwise() {
        let cfg = QRnnConfig { input_dim: 4, hidden_dim: 3, n_actions: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = qrnn_init(&cfg, &mut rng);
        let t_len = 5;
        let data: Vec<f64> = (0..t_len * 2 * 4).map(|i| ((i * 31 % 17) as f64 - 8.0) / 10.0).collect();
        let x = Tensor::from_vec(&[t_len, 2, 4], data.clone());
        let h0 = RnnState::zeros(2, 3);
        let (q_seq, _, _) = qrnn_forward_seq(&params, &x, &h0, None).unwrap();

        let mut h = h0.as_matrix();
        for t in 0..t_len {
            let x_t = Tensor::from_vec(&[2, 4], data[t * 8..(t + 1) * 8].to_vec());
            let (q, h_next) = qrnn_step(&params, &x_t, &h);
            assert_eq!(&q_seq.data()[t * 4..(t + 1) * 4], q.data());
            h = h_next;
        }
    }

    #[test]
    fn seq_grads_pass_finite_diff() {
        let cfg = QRnnConfig { input_dim: 3, hidden_dim: 3, n_actions: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = qrnn_init(&cfg, &mut rng);
        let t_len = 6;
        let data: Vec<f64> = (0..t_len * 2 * 3).map(|i| ((i * 23 % 19) as f64 - 9.0) / 11.0).collect();
        let x = Tensor::from_vec(&[t_len, 2, 3], data);
        let h0 = RnnState::zeros(2, 3);
        let resets: Vec<bool> = (0..t_len * 2).map(|i| i == 4).collect();
        let loss = |ps: &ParamSet| {
            let (q, _, _) = qrnn_forward_seq(ps, &x, &h0, Some(&resets)).unwrap();
            q.data().iter().map(|&v| v * v).sum::<f64>()
        };
        let (q, _, cache) = qrnn_forward_seq(&params, &x, &h0, Some(&resets)).unwrap();
        let dq = Tensor::from_vec(q.shape(), q.data().iter().map(|&v| 2.0 * v).collect());
        let grads = qrnn_backward_seq(&params, &cache, &dq);
        let err = finite_diff_check(loss, &params, &grads, 1e-5);
        assert!(err < 1e-5, "err = {err}");
    }
}
