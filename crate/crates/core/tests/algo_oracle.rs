//! Algorithm-family oracles: hand-rolled target computations, dense
//! projection reference, GAE direct summation, analytic bandit gradients,
//! and finite-difference checks for every loss.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlstack_core::algo::{
    actor_loss, categorical_loss, compute_gae, critic_loss, dqn_loss, double_target, pg_loss,
    project_distribution, r2d1_loss, target_sync, CategoricalCfg, PgConfig, PgVariant,
    PrioritySegment, R2d1Config, TargetSync,
};
use rlstack_core::nn::{
    ac_init, finite_diff_check, mlp_forward, mlp_init, qrnn_init, AcConfig, MlpConfig,
    Nonlinearity, ParamSet, QRnnConfig, Tensor,
};
use rlstack_core::replay::{
    ActionBatch, PrioritySpec, ReplayKey, SequenceBatch, SequenceSpec, TransitionBatch,
};

fn rngc(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn transition_batch(
    rng: &mut StdRng,
    k: usize,
    obs_dim: usize,
    n_actions: usize,
    gamma: f64,
    n: usize,
) -> TransitionBatch {
    let obs = Tensor::from_vec(
        &[k, obs_dim],
        (0..k * obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let next_obs = Tensor::from_vec(
        &[k, obs_dim],
        (0..k * obs_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    );
    let actions: Vec<i64> = (0..k).map(|_| rng.gen_range(0..n_actions as i64)).collect();
    let done_n: Vec<f64> = (0..k).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
    TransitionBatch {
        obs,
        next_obs,
        actions: ActionBatch::Discrete(actions),
        return_n: (0..k).map(|_| rng.gen_range(-1.0..2.0)).collect(),
        done_n,
        gamma_n: vec![gamma.powi(n as i32); k],
        is_weights: (0..k).map(|_| rng.gen_range(0.5..1.0)).collect(),
        keys: (0..k).map(|i| ReplayKey { abs_t: i as u64, b: 0 }).collect(),
    }
}

// ---------------------------------------------------------------------------
// DQN

#[test]
fn dqn_target_matches_scalar_oracle() {
    let mut rng = StdRng::seed_from_u64(1);
    let cfg = MlpConfig::new(3, vec![8], 2);
    let params = mlp_init(&cfg, &mut rngc(2));
    let target = mlp_init(&cfg, &mut rngc(3));
    let batch = transition_batch(&mut rng, 16, 3, 2, 0.9, 3);
    let (loss, _, deltas) = dqn_loss(&params, &target, &cfg, false, &batch).unwrap();

    // scalar oracle
    let (q_all, _) = mlp_forward(&params, &cfg, &batch.obs).unwrap();
    let (qt, _) = mlp_forward(&target, &cfg, &batch.next_obs).unwrap();
    let actions = match &batch.actions {
        ActionBatch::Discrete(a) => a,
        _ => unreachable!(),
    };
    let mut want_loss = 0.0;
    for i in 0..16 {
        let boot = if batch.done_n[i] > 0.5 {
            0.0
        } else {
            qt.row(i).iter().cloned().fold(f64::MIN, f64::max)
        };
        let y = batch.return_n[i] + batch.gamma_n[i] * (1.0 - batch.done_n[i]) * boot;
        let d = y - q_all.row(i)[actions[i] as usize];
        assert!((deltas[i] - d.abs()).abs() < 1e-12);
        let h = if d.abs() <= 1.0 { 0.5 * d * d } else { d.abs() - 0.5 };
        want_loss += batch.is_weights[i] * h / 16.0;
    }
    assert!((loss - want_loss).abs() < 1e-12);
}

#[test]
fn dqn_done_and_myopic_limits() {
    let mut rng = StdRng::seed_from_u64(5);
    let cfg = MlpConfig::new(2, vec![4], 2);
    let params = mlp_init(&cfg, &mut rngc(6));
    let target = mlp_init(&cfg, &mut rngc(7));
    // all done: y = return_n exactly
    let mut batch = transition_batch(&mut rng, 4, 2, 2, 0.9, 1);
    batch.done_n = vec![1.0; 4];
    batch.is_weights = vec![1.0; 4];
    let (_, _, deltas) = dqn_loss(&params, &target, &cfg, false, &batch).unwrap();
    let (q_all, _) = mlp_forward(&params, &cfg, &batch.obs).unwrap();
    let actions = match &batch.actions {
        ActionBatch::Discrete(a) => a.clone(),
        _ => unreachable!(),
    };
    for i in 0..4 {
        let want = (batch.return_n[i] - q_all.row(i)[actions[i] as usize]).abs();
        assert!((deltas[i] - want).abs() < 1e-12);
    }
    // gamma = 0 (gamma_n = 0): y = return_n even without done
    let mut batch = transition_batch(&mut rng, 4, 2, 2, 0.0, 1);
    batch.done_n = vec![0.0; 4];
    batch.gamma_n = vec![0.0; 4];
    let (_, _, deltas) = dqn_loss(&params, &target, &cfg, false, &batch).unwrap();
    let (q_all, _) = mlp_forward(&params, &cfg, &batch.obs).unwrap();
    let actions = match &batch.actions {
        ActionBatch::Discrete(a) => a.clone(),
        _ => unreachable!(),
    };
    for i in 0..4 {
        let want = (batch.return_n[i] - q_all.row(i)[actions[i] as usize]).abs();
        assert!((deltas[i] - want).abs() < 1e-12);
    }
}

#[test]
fn double_target_brute_force() {
    assert_eq!(double_target(&[1.0, 3.0], &[5.0, 2.0]), 2.0);
    // online == target degenerates to the plain max
    assert_eq!(double_target(&[4.0, 1.0], &[4.0, 1.0]), 4.0);
    // argmax tie breaks to the lowest index
    assert_eq!(double_target(&[2.0, 2.0], &[7.0, 9.0]), 7.0);
    // exhaustive check over random vectors
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..100 {
        let online: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut best = 0;
        for i in 1..4 {
            if online[i] > online[best] {
                best = i;
            }
        }
        assert_eq!(double_target(&online, &target), target[best]);
    }
}

#[test]
fn dqn_gradients_pass_finite_differences() {
    let mut rng = StdRng::seed_from_u64(11);
    for double in [false, true] {
        let cfg = MlpConfig::new(3, vec![6], 2);
        let params = mlp_init(&cfg, &mut rngc(12));
        let target = mlp_init(&cfg, &mut rngc(13));
        let batch = transition_batch(&mut rng, 8, 3, 2, 0.95, 2);
        let (_, grads, _) = dqn_loss(&params, &target, &cfg, double, &batch).unwrap();
        let err = finite_diff_check(
            |ps| dqn_loss(ps, &target, &cfg, double, &batch).unwrap().0,
            &params,
            &grads,
            1e-5,
        );
        assert!(err < 1e-5, "double={double}: err {err}");
    }
}

#[test]
fn dueling_dqn_gradients_pass_finite_differences() {
    let mut rng = StdRng::seed_from_u64(21);
    let cfg = MlpConfig {
        input_dim: 3,
        hidden: vec![6],
        output_dim: 2,
        nonlinearity: Nonlinearity::Tanh,
        dueling: true,
        atoms: None,
    };
    let params = mlp_init(&cfg, &mut rngc(22));
    let target = mlp_init(&cfg, &mut rngc(23));
    let batch = transition_batch(&mut rng, 8, 3, 2, 0.9, 1);
    let (_, grads, _) = dqn_loss(&params, &target, &cfg, true, &batch).unwrap();
    let err = finite_diff_check(
        |ps| dqn_loss(ps, &target, &cfg, true, &batch).unwrap().0,
        &params,
        &grads,
        1e-5,
    );
    assert!(err < 1e-5, "err {err}");
}

// ---------------------------------------------------------------------------
// Categorical projection

#[test]
fn projection_identity_and_clamp() {
    let support: Vec<f64> = (0..5).map(|i| -2.0 + i as f64).collect(); // [-2..2]
    // r=0, gamma=1: identity on any distribution over atoms
    let p = vec![0.1, 0.2, 0.3, 0.25, 0.15];
    let m = project_distribution(&p, 0.0, 1.0, &support);
    for (a, b) in m.iter().zip(&p) {
        assert!((a - b).abs() < 1e-15);
    }
    // r beyond v_max: all mass at the top atom
    let m = project_distribution(&p, 100.0, 0.9, &support);
    assert!((m[4] - 1.0).abs() < 1e-12);
    assert!(m[..4].iter().all(|&v| v == 0.0));
}

#[test]
fn projection_matches_dense_oracle_and_conserves_mass() {
    let mut rng = StdRng::seed_from_u64(31);
    let support: Vec<f64> = (0..11).map(|i| -1.0 + 0.2 * i as f64).collect();
    for _ in 0..500 {
        let raw: Vec<f64> = (0..11).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        let r = rng.gen_range(-2.0..2.0);
        let g = rng.gen_range(0.0..1.0);
        let m = project_distribution(&p, r, g, &support);
        // dense per-atom oracle
        let v_min = support[0];
        let v_max = support[10];
        let dz = 0.2;
        let mut want = vec![0.0f64; 11];
        for j in 0..11 {
            let tz = (r + g * support[j]).clamp(v_min, v_max);
            let b = (tz - v_min) / dz;
            let l = b.floor() as usize;
            let u = b.ceil() as usize;
            if l == u {
                want[l] += p[j];
            } else {
                want[l] += p[j] * (u as f64 - b);
                want[u] += p[j] * (b - l as f64);
            }
        }
        for (a, b) in m.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12, "mass conserved");
    }
}

#[test]
fn categorical_gradients_pass_finite_differences() {
    let mut rng = StdRng::seed_from_u64(41);
    let cat = CategoricalCfg { atoms: 5, v_min: -2.0, v_max: 2.0 };
    let cfg = MlpConfig {
        input_dim: 3,
        hidden: vec![6],
        output_dim: 2,
        nonlinearity: Nonlinearity::Tanh,
        dueling: false,
        atoms: Some(5),
    };
    let params = mlp_init(&cfg, &mut rngc(42));
    let target = mlp_init(&cfg, &mut rngc(43));
    let support = cat.support();
    let batch = transition_batch(&mut rng, 6, 3, 2, 0.9, 1);
    let (_, grads, _) = categorical_loss(&params, &target, &cfg, &support, true, &batch).unwrap();
    let err = finite_diff_check(
        |ps| categorical_loss(ps, &target, &cfg, &support, true, &batch).unwrap().0,
        &params,
        &grads,
        1e-5,
    );
    assert!(err < 1e-5, "err {err}");
}

// ---------------------------------------------------------------------------
// GAE

#[test]
fn gae_limits_and_direct_case() {
    // lambda = 0 reduces to the TD residual
    let rewards = vec![1.0];
    let values = vec![2.5];
    let (adv, ret) = compute_gae(&rewards, &values, &[false], &[false], &[2.0], 1, 1, 1.0, 0.0);
    assert!((adv[0] - 0.5).abs() < 1e-15); // 1 + 2 - 2.5
    assert!((ret[0] - 3.0).abs() < 1e-15);

    // lambda = 1, done-free: adv = discounted return (with bootstrap) - V
    let t_len = 6;
    let rewards: Vec<f64> = (0..t_len).map(|t| (t as f64) * 0.3 - 0.5).collect();
    let values: Vec<f64> = (0..t_len).map(|t| (t as f64) * 0.1).collect();
    let gamma = 0.9;
    let boot = 1.7;
    let (adv, _) = compute_gae(
        &rewards,
        &values,
        &vec![false; t_len],
        &vec![false; t_len],
        &[boot],
        t_len,
        1,
        gamma,
        1.0,
    );
    for t in 0..t_len {
        let mut g = 0.0;
        let mut d = 1.0;
        for j in t..t_len {
            g += d * rewards[j];
            d *= gamma;
        }
        g += d * boot;
        assert!((adv[t] - (g - values[t])).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn gae_matches_direct_summation_on_random_buffers() {
    let mut rng = StdRng::seed_from_u64(51);
    for _case in 0..1000 {
        let t_len = rng.gen_range(2..12);
        let b_len = rng.gen_range(1..4);
        let gamma: f64 = rng.gen_range(0.2..1.0);
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let n = t_len * b_len;
        let rewards: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dones: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let timeouts: Vec<bool> = dones.iter().map(|&d| d && rng.gen_bool(0.3)).collect();
        let boot: Vec<f64> = (0..b_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (adv, ret) = compute_gae(&rewards, &values, &dones, &timeouts, &boot, t_len, b_len, gamma, lambda);
        // direct-summation oracle: adv_t = sum_j (gamma*lambda)^j delta_{t+j}
        // with the product of nonterminal masks up to j
        for b in 0..b_len {
            for t in 0..t_len {
                let mut want = 0.0;
                let mut coeff = 1.0;
                for j in t..t_len {
                    let i = j * b_len + b;
                    let nonterminal = if dones[i] && !timeouts[i] { 0.0 } else { 1.0 };
                    let v_next = if j + 1 < t_len { values[(j + 1) * b_len + b] } else { boot[b] };
                    let delta = rewards[i] + gamma * nonterminal * v_next - values[i];
                    want += coeff * delta;
                    coeff *= gamma * lambda * nonterminal;
                    if coeff == 0.0 {
                        break;
                    }
                }
                let i = t * b_len + b;
                assert!((adv[i] - want).abs() < 1e-9, "adv mismatch at t={t} b={b}");
                assert!((ret[i] - (adv[i] + values[i])).abs() < 1e-12);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Policy gradients

fn pg_cfg(variant: PgVariant) -> PgConfig {
    PgConfig {
        variant,
        gamma: 0.99,
        gae_lambda: 0.95,
        value_coef: 0.5,
        entropy_coef: 0.01,
        lr: 3e-4,
        epochs: 1,
        minibatches: 1,
        clip_eps: 0.2,
        grad_clip: 0.0,
        normalize_adv: false,
        hidden: vec![6],
        nonlinearity: Nonlinearity::Tanh,
    }
}

#[test]
fn a2c_zero_advantage_kills_policy_term() {
    let ac = AcConfig { obs_dim: 2, hidden: vec![], n_actions: 2, nonlinearity: Nonlinearity::Tanh };
    let params = ac_init(&ac, &mut rngc(61));
    let mut cfg = pg_cfg(PgVariant::A2c);
    cfg.value_coef = 0.0;
    cfg.entropy_coef = 0.0;
    let obs = Tensor::from_vec(&[3, 2], vec![0.1, -0.2, 0.4, 0.5, -0.6, 0.3]);
    let (loss, grads, _) =
        pg_loss(&params, &ac, &cfg, &obs, &[0, 1, 0], &[0.0; 3], &[0.0; 3], &[0.0; 3]).unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(grads.l2_norm(), 0.0);
}

#[test]
fn a2c_matches_analytic_bandit_gradient() {
    // two-action bandit, linear policy on a constant observation: the
    // score-function gradient is -mean(adv * (onehot - pi)) on the logits
    let ac = AcConfig { obs_dim: 1, hidden: vec![], n_actions: 2, nonlinearity: Nonlinearity::Tanh };
    let mut params = ParamSet::new();
    params.push("pi.w", Tensor::from_vec(&[2, 1], vec![0.3, -0.2]));
    params.push("pi.b", Tensor::from_vec(&[2], vec![0.1, 0.0]));
    params.push("v.w", Tensor::from_vec(&[1, 1], vec![0.0]));
    params.push("v.b", Tensor::from_vec(&[1], vec![0.0]));
    let mut cfg = pg_cfg(PgVariant::A2c);
    cfg.value_coef = 0.0;
    cfg.entropy_coef = 0.0;
    let obs = Tensor::from_vec(&[4, 1], vec![1.0; 4]);
    let actions = [0usize, 1, 0, 1];
    let adv = [1.0, -0.5, 0.25, 2.0];
    let (_, grads, _) =
        pg_loss(&params, &ac, &cfg, &obs, &actions, &[0.0; 4], &adv, &[0.0; 4]).unwrap();

    let logits = [0.3 + 0.1, -0.2];
    let z = (logits[0]).exp() + (logits[1]).exp();
    let pi = [logits[0].exp() / z, logits[1].exp() / z];
    let mut want_b = [0.0f64; 2];
    for i in 0..4 {
        for j in 0..2 {
            let ind = if actions[i] == j { 1.0 } else { 0.0 };
            want_b[j] += -adv[i] * (ind - pi[j]) / 4.0;
        }
    }
    for j in 0..2 {
        assert!((grads.get("pi.b").data()[j] - want_b[j]).abs() < 1e-12);
        // w acts on obs = 1, so its gradient equals the bias gradient
        assert!((grads.get("pi.w").data()[j] - want_b[j]).abs() < 1e-12);
    }
}

#[test]
fn ppo_surrogate_direct_values() {
    // rho = 1.5, adv = +1, eps = 0.2 -> clipped objective 1.2
    // rho = 1.5, adv = -1           -> unclipped side, -1.5
    let rho: f64 = 1.5;
    let eps = 0.2;
    let clip = rho.clamp(1.0 - eps, 1.0 + eps);
    assert_eq!((rho * 1.0).min(clip * 1.0), 1.2);
    assert_eq!((rho * -1.0).min(clip * -1.0), -1.5);
    // rho = 1: objective = adv on both branches
    assert_eq!((1.0 * 0.7f64).min(1.0 * 0.7), 0.7);
}

#[test]
fn ppo_with_huge_clip_matches_a2c_policy_gradient() {
    let ac = AcConfig { obs_dim: 2, hidden: vec![5], n_actions: 3, nonlinearity: Nonlinearity::Tanh };
    let params = ac_init(&ac, &mut rngc(71));
    let obs = Tensor::from_vec(&[4, 2], vec![0.2, -0.4, 0.5, 0.1, -0.3, 0.8, 0.0, 0.6]);
    let actions = [0usize, 2, 1, 1];
    let adv = [0.5, -1.0, 0.7, 0.2];
    // old log probs computed from the same params so the ratio is exactly 1
    let (logits, _, _) = rlstack_core::nn::ac_forward(&params, &ac, &obs).unwrap();
    let old: Vec<f64> = (0..4)
        .map(|i| rlstack_core::nn::log_softmax(logits.row(i))[actions[i]])
        .collect();
    let mut ppo = pg_cfg(PgVariant::Ppo);
    ppo.clip_eps = 1e9;
    ppo.value_coef = 0.0;
    ppo.entropy_coef = 0.0;
    let mut a2c = pg_cfg(PgVariant::A2c);
    a2c.value_coef = 0.0;
    a2c.entropy_coef = 0.0;
    let (_, g_ppo, _) = pg_loss(&params, &ac, &ppo, &obs, &actions, &old, &adv, &[0.0; 4]).unwrap();
    let (_, g_a2c, _) = pg_loss(&params, &ac, &a2c, &obs, &actions, &old, &adv, &[0.0; 4]).unwrap();
    for i in 0..g_ppo.len() {
        let (na, ta) = g_ppo.at(i);
        let (nb, tb) = g_a2c.at(i);
        assert_eq!(na, nb);
        for (x, y) in ta.data().iter().zip(tb.data()) {
            assert!((x - y).abs() < 1e-10, "{na}: {x} vs {y}");
        }
    }
}

#[test]
fn pg_gradients_pass_finite_differences() {
    for variant in [PgVariant::A2c, PgVariant::Ppo] {
        let ac = AcConfig { obs_dim: 2, hidden: vec![4], n_actions: 2, nonlinearity: Nonlinearity::Tanh };
        let params = ac_init(&ac, &mut rngc(81));
        let obs = Tensor::from_vec(&[3, 2], vec![0.3, -0.1, 0.6, 0.2, -0.5, 0.4]);
        let actions = [0usize, 1, 1];
        let adv = [0.4, -0.8, 1.2];
        let ret = [1.0, 0.5, -0.2];
        let old = [-0.7, -0.6, -0.9];
        let cfg = pg_cfg(variant);
        let (_, grads, _) = pg_loss(&params, &ac, &cfg, &obs, &actions, &old, &adv, &ret).unwrap();
        let err = finite_diff_check(
            |ps| pg_loss(ps, &ac, &cfg, &obs, &actions, &old, &adv, &ret).unwrap().0,
            &params,
            &grads,
            1e-5,
        );
        assert!(err < 1e-5, "{variant:?}: err {err}");
    }
}

// ---------------------------------------------------------------------------
// DDPG / TD3

#[test]
fn qpg_gradients_pass_finite_differences() {
    let actor_cfg = MlpConfig::new(2, vec![4], 1);
    let critic_cfg = MlpConfig::new(3, vec![5], 1);
    let actor = mlp_init(&actor_cfg, &mut rngc(91));
    let critic = mlp_init(&critic_cfg, &mut rngc(92));
    let obs = Tensor::from_vec(&[3, 2], vec![0.2, -0.6, 0.1, 0.9, -0.4, 0.5]);

    // critic loss vs fixed targets
    let x = Tensor::from_vec(&[3, 3], vec![0.2, -0.6, 0.3, 0.1, 0.9, -0.8, -0.4, 0.5, 0.6]);
    let targets = [0.5, -0.2, 1.1];
    let (_, cg, _) = critic_loss(&critic, &critic_cfg, &x, &targets).unwrap();
    let err = finite_diff_check(
        |ps| critic_loss(ps, &critic_cfg, &x, &targets).unwrap().0,
        &critic,
        &cg,
        1e-5,
    );
    assert!(err < 1e-5, "critic err {err}");

    // actor loss through the critic
    let (_, ag) = actor_loss(&actor, &actor_cfg, &critic, &critic_cfg, &obs).unwrap();
    let err = finite_diff_check(
        |ps| actor_loss(ps, &actor_cfg, &critic, &critic_cfg, &obs).unwrap().0,
        &actor,
        &ag,
        1e-5,
    );
    assert!(err < 1e-5, "actor err {err}");
}

#[test]
fn twin_min_with_equal_critics_equals_single() {
    let a: f64 = 0.73;
    assert_eq!(a.min(a), a);
}

#[test]
fn critic_fixpoint_on_one_state_mdp() {
    // supervised iteration toward y = r + gamma * Q_target converges to
    // r / (1 - gamma)
    let critic_cfg = MlpConfig::new(2, vec![8], 1);
    let mut critic = mlp_init(&critic_cfg, &mut rngc(101));
    let mut critic_target = critic.clone();
    let mut adam = rlstack_core::nn::AdamState::new(
        &critic,
        rlstack_core::nn::AdamHyper { lr: 5e-3, ..Default::default() },
    );
    let (r, gamma) = (1.0, 0.9);
    let x = Tensor::from_vec(&[1, 2], vec![0.5, -0.5]); // fixed (s, a)
    for _ in 0..4000 {
        let (qt, _) = mlp_forward(&critic_target, &critic_cfg, &x).unwrap();
        let y = r + gamma * qt.data()[0];
        let (_, grads, _) = critic_loss(&critic, &critic_cfg, &x, &[y]).unwrap();
        rlstack_core::nn::adam_update(&mut critic, &grads, &mut adam).unwrap();
        target_sync(&critic, &mut critic_target, TargetSync::Soft(0.02), 0);
    }
    let (q, _) = mlp_forward(&critic, &critic_cfg, &x).unwrap();
    assert!((q.data()[0] - r / (1.0 - gamma)).abs() < 1e-3, "q = {}", q.data()[0]);
}

// ---------------------------------------------------------------------------
// R2D1

fn sequence_batch(rng: &mut StdRng, k: usize, warmup: usize, train: usize, n: usize) -> SequenceBatch {
    let len = warmup + train + n;
    let obs_dim = 3;
    let hidden = 4;
    SequenceBatch {
        k,
        len_ext: len,
        warmup_t: warmup,
        train_t: train,
        n_ext: n,
        obs: (0..len * k * obs_dim).map(|_| rng.gen_range(-1.0..1.0f32)).collect(),
        obs_dim,
        actions: (0..len * k).map(|_| rng.gen_range(0..2)).collect(),
        rewards: (0..len * k).map(|_| rng.gen_range(-1.0..1.0f32)).collect(),
        done: (0..len * k).map(|_| rng.gen_bool(0.1)).collect(),
        timeouts: vec![false; len * k],
        prev_actions: (0..len * k).map(|_| rng.gen_range(0..2)).collect(),
        prev_rewards: (0..len * k).map(|_| rng.gen_range(-1.0..1.0f32)).collect(),
        init_state: (0..k * hidden).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        hidden_dim: hidden,
        is_weights: vec![1.0; k],
        keys: (0..k).map(|i| ReplayKey { abs_t: i as u64, b: 0 }).collect(),
    }
}

fn r2d1_cfg(warmup: usize, train: usize, n: usize) -> R2d1Config {
    R2d1Config {
        gamma: 0.9,
        n_step: n,
        lr: 1e-3,
        batch_size: 2,
        min_steps_learn: 0,
        updates_per_batch: 1,
        target: TargetSync::Hard(100),
        seq: SequenceSpec { warmup_t: warmup, train_t: train, period_m: 1 },
        replay_capacity_t: 64,
        prioritized: Some(PrioritySpec::default()),
        priority_eta: 0.9,
        priority_segment: PrioritySegment::SecondHalf,
        td_initial_priorities: false,
        value_rescale: false,
        hidden_dim: 4,
        grad_clip: 0.0,
    }
}

#[test]
fn r2d1_gradients_pass_finite_differences_over_t6() {
    let mut rng = StdRng::seed_from_u64(111);
    let net = QRnnConfig { input_dim: 3 + 2 + 1, hidden_dim: 4, n_actions: 2 };
    let params = qrnn_init(&net, &mut rngc(112));
    let target = qrnn_init(&net, &mut rngc(113));
    let cfg = r2d1_cfg(2, 4, 2);
    let batch = sequence_batch(&mut rng, 2, 2, 4, 2);
    let (_, grads, _, _) = r2d1_loss(&params, &target, &net, &cfg, &batch).unwrap();
    let err = finite_diff_check(
        |ps| r2d1_loss(ps, &target, &net, &cfg, &batch).unwrap().0,
        &params,
        &grads,
        1e-5,
    );
    assert!(err < 1e-5, "err {err}");
}

#[test]
fn r2d1_degenerate_warmup0_train1_is_feedforward_double_dqn() {
    // with no warmup and one train step, the loss at t=0 is the plain
    // n-step double-DQN target computed from recurrent features
    let mut rng = StdRng::seed_from_u64(121);
    let net = QRnnConfig { input_dim: 3 + 2 + 1, hidden_dim: 4, n_actions: 2 };
    let params = qrnn_init(&net, &mut rngc(122));
    let target = qrnn_init(&net, &mut rngc(123));
    let n = 1;
    let cfg = r2d1_cfg(0, 1, n);
    let mut batch = sequence_batch(&mut rng, 1, 0, 1, n);
    batch.done = vec![false; batch.done.len()];
    let (loss, _, _, _) = r2d1_loss(&params, &target, &net, &cfg, &batch).unwrap();

    // manual: forward both nets over the two rows, compute the target
    let (x, resets) = rlstack_core::algo::sequence_inputs(&batch, 2);
    let h0 = rlstack_core::nn::RnnState::from_matrix(&Tensor::from_vec(
        &[1, 4],
        batch.init_state.clone(),
    ));
    let (qo, _, _) = rlstack_core::nn::qrnn_forward_seq(&params, &x, &h0, Some(&resets)).unwrap();
    let (qt, _, _) = rlstack_core::nn::qrnn_forward_seq(&target, &x, &h0, Some(&resets)).unwrap();
    let a_star = if qo.data()[2] >= qo.data()[3] { 0 } else { 1 };
    let y = batch.rewards[0] as f64 + 0.9 * qt.data()[2 + a_star];
    let q_sa = qo.data()[batch.actions[0] as usize];
    let d: f64 = y - q_sa;
    let want = if d.abs() <= 1.0 { 0.5 * d * d } else { d.abs() - 0.5 };
    assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
}

#[test]
fn value_rescale_round_trip() {
    use rlstack_core::algo::{value_rescale, value_rescale_inv};
    for x in [-100.0, -3.7, -0.1, 0.0, 0.5, 2.0, 47.0] {
        let y = value_rescale(x);
        assert!((value_rescale_inv(y) - x).abs() < 1e-9, "x = {x}");
    }
}
