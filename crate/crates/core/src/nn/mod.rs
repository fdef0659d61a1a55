//! Self-contained dense numerics: tensors, MLP and recurrent cells with
//! reverse-mode gradients, Adam, gradient all-reduce, distributions, and
//! finite-difference verification. Everything is a pure function over
//! caller-owned data and deterministic given the same inputs and rng stream.

mod ac;
mod adam;
mod checkpoint;
mod dist;
mod fdcheck;
mod mlp;
mod params;
mod qrnn;
mod rnn;
mod tensor;

pub use ac::{ac_backward, ac_forward, ac_init, AcCache, AcConfig};
pub use adam::{adam_update, AdamHyper, AdamState};
pub use checkpoint::{load_params, save_params};
pub use dist::{log_softmax, softmax, Categorical, DiagGaussian, LOG_STD_MAX, LOG_STD_MIN};
pub use fdcheck::finite_diff_check;
pub use mlp::{dueling_combine, mlp_backward, mlp_forward, mlp_init, MlpCache, MlpConfig};
pub use params::{allreduce_mean, GradSet, ParamSet};
pub use qrnn::{qrnn_backward_seq, qrnn_forward_seq, qrnn_init, qrnn_step, QRnnCache, QRnnConfig};
pub use rnn::{
    rnn_backward_sequence, rnn_forward_sequence, rnn_init, rnn_step, RnnCache, RnnConfig, RnnState,
};
pub use tensor::{linear_backward, linear_forward, Nonlinearity, Tensor};
