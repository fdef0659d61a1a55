//! Single-layer tanh recurrent cell with sequence forward/backward over
//! `[Time, Batch]` data and optional in-sequence resets at episode starts.

use super::params::{GradSet, ParamSet};
use super::tensor::{linear_backward, linear_forward, Tensor};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Recurrent state, kept in `[num_layers, batch, hidden]` layout. The
/// built-in cell is single-layer; reshaping to and from per-slot `[batch,
/// hidden]` rows is lossless.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnState {
    pub hidden: Tensor,
}

impl RnnState {
    pub fn zeros(batch: usize, hidden_size: usize) -> Self {
        RnnState { hidden: Tensor::zeros(&[1, batch, hidden_size]) }
    }

    pub fn batch(&self) -> usize {
        self.hidden.shape()[1]
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden.shape()[2]
    }

    /// Row-major `[batch, hidden]` matrix of the single layer.
    pub fn as_matrix(&self) -> Tensor {
        let b = self.batch();
        let h = self.hidden_size();
        Tensor::from_vec(&[b, h], self.hidden.data().to_vec())
    }

    pub fn from_matrix(m: &Tensor) -> Self {
        let (b, h) = (m.shape()[0], m.shape()[1]);
        RnnState { hidden: Tensor::from_vec(&[1, b, h], m.data().to_vec()) }
    }

    /// One slot's hidden row.
    pub fn slot(&self, b: usize) -> &[f64] {
        let h = self.hidden_size();
        &self.hidden.data()[b * h..(b + 1) * h]
    }

    pub fn set_slot(&mut self, b: usize, values: &[f64]) {
        let h = self.hidden_size();
        self.hidden.data_mut()[b * h..(b + 1) * h].copy_from_slice(values);
    }

    pub fn zero_slot(&mut self, b: usize) {
        let h = self.hidden_size();
        self.hidden.data_mut()[b * h..(b + 1) * h].iter_mut().for_each(|v| *v = 0.0);
    }
}

#[derive(Clone, Debug)]
pub struct RnnConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

pub fn rnn_init(cfg: &RnnConfig, rng: &mut ChaCha8Rng) -> ParamSet {
    let mut params = ParamSet::new();
    let bx = 1.0 / (cfg.input_dim as f64).sqrt();
    let bh = 1.0 / (cfg.hidden_dim as f64).sqrt();
    let wx: Vec<f64> = (0..cfg.hidden_dim * cfg.input_dim).map(|_| rng.gen_range(-bx..bx)).collect();
    let wh: Vec<f64> = (0..cfg.hidden_dim * cfg.hidden_dim).map(|_| rng.gen_range(-bh..bh)).collect();
    let b: Vec<f64> = (0..cfg.hidden_dim).map(|_| rng.gen_range(-bh..bh)).collect();
    params.push("rnn.wx", Tensor::from_vec(&[cfg.hidden_dim, cfg.input_dim], wx));
    params.push("rnn.wh", Tensor::from_vec(&[cfg.hidden_dim, cfg.hidden_dim], wh));
    params.push("rnn.b", Tensor::from_vec(&[cfg.hidden_dim], b));
    params
}

/// `h' = tanh(x Wx^T + h Wh^T + b)` over a batch of rows. The same routine
/// serves sampling (one step) and training (unrolled), so results agree
/// bit-for-bit.
pub fn rnn_step(params: &ParamSet, x: &Tensor, h: &Tensor) -> Tensor {
    let zx = linear_forward(x, params.get("rnn.wx"), params.get("rnn.b"));
    let zero_b = Tensor::zeros(&[params.get("rnn.wh").shape()[0]]);
    let zh = linear_forward(h, params.get("rnn.wh"), &zero_b);
    let data: Vec<f64> = zx
        .data()
        .iter()
        .zip(zh.data())
        .map(|(&a, &b)| (a + b).tanh())
        .collect();
    Tensor::from_vec(zx.shape(), data)
}

pub struct RnnCache {
    xs: Vec<Tensor>,      // [B, in] per step
    h_ins: Vec<Tensor>,   // state fed into each step (post-reset)
    h_outs: Vec<Tensor>,  // state after each step
    resets: Option<Vec<bool>>, // [T*B]
}

/// Unroll the cell over `x_seq: [T, B, in]` starting from `h0`. Rows of the
/// carried state are zeroed before step `t` wherever `resets[t*B + b]` is
/// true. Returns the per-step hidden outputs `[T, B, H]` and the final state.
pub fn rnn_forward_sequence(
    params: &ParamSet,
    x_seq: &Tensor,
    h0: &RnnState,
    resets: Option<&[bool]>,
) -> Result<(Tensor, RnnState, RnnCache)> {
    let dims = x_seq.shape();
    if dims.len() != 3 {
        return Err(Error::DimMismatch(format!("sequence input shape {dims:?}")));
    }
    let (t_len, batch, in_dim) = (dims[0], dims[1], dims[2]);
    if h0.batch() != batch {
        return Err(Error::DimMismatch(format!(
            "h0 batch {} does not match sequence batch {batch}",
            h0.batch()
        )));
    }
    if let Some(r) = resets {
        if r.len() != t_len * batch {
            return Err(Error::DimMismatch("reset mask length".into()));
        }
    }
    let hidden = h0.hidden_size();
    let mut h = h0.as_matrix();
    let mut xs = Vec::with_capacity(t_len);
    let mut h_ins = Vec::with_capacity(t_len);
    let mut h_outs = Vec::with_capacity(t_len);
    let mut y = Tensor::zeros(&[t_len, batch, hidden]);
    for t in 0..t_len {
        let x_t = Tensor::from_vec(
            &[batch, in_dim],
            x_seq.data()[t * batch * in_dim..(t + 1) * batch * in_dim].to_vec(),
        );
        if let Some(r) = resets {
            for b in 0..batch {
                if r[t * batch + b] {
                    h.row_mut(b).iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        let h_next = rnn_step(params, &x_t, &h);
        y.data_mut()[t * batch * hidden..(t + 1) * batch * hidden]
            .copy_from_slice(h_next.data());
        xs.push(x_t);
        h_ins.push(h.clone());
        h_outs.push(h_next.clone());
        h = h_next;
    }
    let cache = RnnCache { xs, h_ins, h_outs, resets: resets.map(|r| r.to_vec()) };
    Ok((y, RnnState::from_matrix(&h), cache))
}

/// Backpropagation through time. Returns parameter gradients, the gradient
/// w.r.t. `h0`, and the gradient w.r.t. the input sequence.
pub fn rnn_backward_sequence(
    params: &ParamSet,
    cache: &RnnCache,
    upstream: &Tensor,
) -> (GradSet, Tensor, Tensor) {
    let t_len = cache.xs.len();
    let batch = cache.h_ins[0].shape()[0];
    let hidden = cache.h_ins[0].shape()[1];
    let in_dim = cache.xs[0].shape()[1];
    assert_eq!(upstream.shape(), &[t_len, batch, hidden]);

    let mut grads = params.zeros_like();
    let mut dx_seq = Tensor::zeros(&[t_len, batch, in_dim]);
    let mut dh_carry = Tensor::zeros(&[batch, hidden]);

    for t in (0..t_len).rev() {
        let h_out = &cache.h_outs[t];
        let mut dh = Tensor::from_vec(
            &[batch, hidden],
            upstream.data()[t * batch * hidden..(t + 1) * batch * hidden].to_vec(),
        );
        dh.data_mut().iter_mut().zip(dh_carry.data()).for_each(|(d, &c)| *d += c);
        // through tanh
        let dz = Tensor::from_vec(
            &[batch, hidden],
            dh.data()
                .iter()
                .zip(h_out.data())
                .map(|(&d, &h)| d * (1.0 - h * h))
                .collect(),
        );
        let (dwx, db, dx) = linear_backward(&cache.xs[t], params.get("rnn.wx"), &dz);
        let (dwh, _, mut dh_prev) = linear_backward(&cache.h_ins[t], params.get("rnn.wh"), &dz);
        grads.get_mut("rnn.wx").data_mut().iter_mut().zip(dwx.data()).for_each(|(g, &v)| *g += v);
        grads.get_mut("rnn.wh").data_mut().iter_mut().zip(dwh.data()).for_each(|(g, &v)| *g += v);
        grads.get_mut("rnn.b").data_mut().iter_mut().zip(db.data()).for_each(|(g, &v)| *g += v);
        dx_seq.data_mut()[t * batch * in_dim..(t + 1) * batch * in_dim].copy_from_slice(dx.data());
        // state was zeroed at resets, so no gradient flows across them
        if let Some(r) = &cache.resets {
            for b in 0..batch {
                if r[t * batch + b] {
                    dh_prev.row_mut(b).iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
        dh_carry = dh_prev;
    }
    (grads, dh_carry, dx_seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg() -> RnnConfig {
        RnnConfig { input_dim: 3, hidden_dim: 4 }
    }

    #[test]
    fn t1_sequence_equals_single_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = rnn_init(&cfg(), &mut rng);
        let x = Tensor::from_vec(&[1, 2, 3], vec![0.1, -0.2, 0.3, 0.5, 0.0, -0.1]);
        let h0 = RnnState::zeros(2, 4);
        let (y, h_t, _) = rnn_forward_sequence(&params, &x, &h0, None).unwrap();
        let x0 = Tensor::from_vec(&[2, 3], x.data().to_vec());
        let step = rnn_step(&params, &x0, &h0.as_matrix());
        assert_eq!(y.data(), step.data());
        assert_eq!(h_t.as_matrix().data(), step.data());
    }

    #[test]
    fn stepwise_equals_batched_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = rnn_init(&cfg(), &mut rng);
        let t_len = 6;
        let data: Vec<f64> = (0..t_len * 2 * 3).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let x = Tensor::from_vec(&[t_len, 2, 3], data.clone());
        let h0 = RnnState::zeros(2, 4);
        let (y, h_t, _) = rnn_forward_sequence(&params, &x, &h0, None).unwrap();

        let mut h = h0.as_matrix();
        for t in 0..t_len {
            let x_t = Tensor::from_vec(&[2, 3], data[t * 6..(t + 1) * 6].to_vec());
            h = rnn_step(&params, &x_t, &h);
            assert_eq!(&y.data()[t * 8..(t + 1) * 8], h.data());
        }
        assert_eq!(h_t.as_matrix().data(), h.data());
    }

    #[test]
    fn zero_recurrent_weights_match_feedforward() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut params = rnn_init(&cfg(), &mut rng);
        params.get_mut("rnn.wh").fill(0.0);
        let x = Tensor::from_vec(&[2, 1, 3], vec![0.4, -0.5, 0.2, -0.3, 0.9, 0.1]);
        let h0 = RnnState::zeros(1, 4);
        let (y, _, _) = rnn_forward_sequence(&params, &x, &h0, None).unwrap();
        // feed-forward reference: tanh(x Wx^T + b) per step, no state
        for t in 0..2 {
            let x_t = Tensor::from_vec(&[1, 3], x.data()[t * 3..(t + 1) * 3].to_vec());
            let z = linear_forward(&x_t, params.get("rnn.wx"), params.get("rnn.b"));
            for (k, &zv) in z.data().iter().enumerate() {
                assert!((y.data()[t * 4 + k] - zv.tanh()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reset_rows_drop_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = rnn_init(&cfg(), &mut rng);
        let x = Tensor::from_vec(&[2, 1, 3], vec![0.7, 0.2, -0.4, 0.7, 0.2, -0.4]);
        let h0 = RnnState::zeros(1, 4);
        // reset before step 1 → step 1 output equals step 0 output (same input, zero state)
        let resets = vec![false, true];
        let (y, _, _) = rnn_forward_sequence(&params, &x, &h0, Some(&resets)).unwrap();
        assert_eq!(&y.data()[0..4], &y.data()[4..8]);
    }
}
