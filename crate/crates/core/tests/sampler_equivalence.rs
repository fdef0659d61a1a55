//! Cross-mode sampler equivalence: for a fixed master seed, params, and
//! config, all four topologies must produce bit-identical batch streams.

use rlstack_core::agent::{Agent, DqnAgent, EpsilonSpec, Realm};
use rlstack_core::env::{CartPole, ChainMdp, Env, EnvFactory, TrajInfo};
use rlstack_core::nn::{mlp_init, MlpConfig};
use rlstack_core::sampler::{
    AlternatingSampler, CentralizedSampler, DecentralizedSampler, Sampler, SamplerConfig,
    SamplerMode, SerialSampler,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

fn chain_factory() -> Arc<EnvFactory> {
    Arc::new(|_slot| Box::new(ChainMdp::new(10)) as Box<dyn Env>)
}

fn cartpole_factory() -> Arc<EnvFactory> {
    Arc::new(|_slot| Box::new(CartPole::new()) as Box<dyn Env>)
}

fn dqn_agent(obs_dim: usize, n_actions: usize, seed: u64, batch_b: usize) -> Box<dyn Agent> {
    let cfg = MlpConfig::new(obs_dim, vec![16], n_actions);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let params = mlp_init(&cfg, &mut rng);
    let eps = EpsilonSpec { initial: 0.3, final_: 0.3, anneal_steps: 0, ..Default::default() };
    Box::new(DqnAgent::new(cfg, params, eps, None, seed, Realm::Train { learner: 0 }, batch_b))
}

fn config(mode: SamplerMode, t: usize, b: usize, workers: usize) -> SamplerConfig {
    SamplerConfig {
        mode,
        batch_t: t,
        batch_b: b,
        workers,
        eval_envs: 2,
        eval_max_steps: 100,
        discount: 0.99,
    }
}

fn sort_trajs(mut trajs: Vec<TrajInfo>) -> Vec<(usize, i64)> {
    let mut keys: Vec<(usize, i64)> = trajs
        .drain(..)
        .map(|t| (t.length, (t.return_ * 1e6).round() as i64))
        .collect();
    keys.sort();
    keys
}

fn run_mode(
    mode: SamplerMode,
    factory: &Arc<EnvFactory>,
    obs_dim: usize,
    seed: u64,
    t: usize,
    b: usize,
    workers: usize,
    batches: usize,
) -> Vec<(rlstack_core::sarray::StructArray, Vec<(usize, i64)>)> {
    let agent = dqn_agent(obs_dim, 2, seed, b);
    let cfg = config(mode, t, b, workers);
    let realm = Realm::Train { learner: 0 };
    let mut out = Vec::with_capacity(batches);
    let mut sampler: Box<dyn Sampler> = match mode {
        SamplerMode::Serial => {
            Box::new(SerialSampler::new(cfg, agent, factory.as_ref(), seed, realm).unwrap())
        }
        SamplerMode::ParallelDecentralized => {
            Box::new(DecentralizedSampler::new(cfg, agent, factory.clone(), seed, realm).unwrap())
        }
        SamplerMode::ParallelCentralized => {
            Box::new(CentralizedSampler::new(cfg, agent, factory.clone(), seed, realm).unwrap())
        }
        SamplerMode::Alternating => {
            Box::new(AlternatingSampler::new(cfg, agent, factory.clone(), seed, realm).unwrap())
        }
    };
    for _ in 0..batches {
        let batch = sampler.next_batch(None).unwrap();
        out.push((batch.arr, sort_trajs(batch.traj_infos)));
    }
    sampler.shutdown();
    out
}

fn assert_streams_equal(
    a: &[(rlstack_core::sarray::StructArray, Vec<(usize, i64)>)],
    b: &[(rlstack_core::sarray::StructArray, Vec<(usize, i64)>)],
    label: &str,
) {
    assert_eq!(a.len(), b.len());
    for (i, ((arr_a, tr_a), (arr_b, tr_b))) in a.iter().zip(b).enumerate() {
        assert!(arr_a == arr_b, "{label}: batch {i} differs");
        assert_eq!(tr_a, tr_b, "{label}: trajectories of batch {i} differ");
    }
}

#[test]
fn all_modes_bit_identical_on_chain() {
    let factory = chain_factory();
    let seed = 1234;
    let (t, b) = (5, 4);
    let serial = run_mode(SamplerMode::Serial, &factory, 10, seed, t, b, 0, 6);
    let dec = run_mode(SamplerMode::ParallelDecentralized, &factory, 10, seed, t, b, 2, 6);
    let cen = run_mode(SamplerMode::ParallelCentralized, &factory, 10, seed, t, b, 2, 6);
    let alt = run_mode(SamplerMode::Alternating, &factory, 10, seed, t, b, 2, 6);
    assert_streams_equal(&serial, &dec, "serial vs decentralized");
    assert_streams_equal(&serial, &cen, "serial vs centralized");
    assert_streams_equal(&serial, &alt, "serial vs alternating");
}

#[test]
fn all_modes_bit_identical_on_cartpole() {
    let factory = cartpole_factory();
    let seed = 77;
    let (t, b) = (8, 2);
    let serial = run_mode(SamplerMode::Serial, &factory, 4, seed, t, b, 0, 5);
    let dec = run_mode(SamplerMode::ParallelDecentralized, &factory, 4, seed, t, b, 1, 5);
    let cen = run_mode(SamplerMode::ParallelCentralized, &factory, 4, seed, t, b, 2, 5);
    let alt = run_mode(SamplerMode::Alternating, &factory, 4, seed, t, b, 2, 5);
    assert_streams_equal(&serial, &dec, "serial vs decentralized");
    assert_streams_equal(&serial, &cen, "serial vs centralized");
    assert_streams_equal(&serial, &alt, "serial vs alternating");
}

#[test]
fn single_worker_decentralized_equals_serial() {
    let factory = chain_factory();
    let serial = run_mode(SamplerMode::Serial, &factory, 10, 5, 7, 2, 0, 4);
    let dec = run_mode(SamplerMode::ParallelDecentralized, &factory, 10, 5, 7, 2, 1, 4);
    assert_streams_equal(&serial, &dec, "1-worker decentralized");
}

#[test]
fn done_reset_alignment_and_traj_consistency() {
    // per column: rewards between done flags sum to the recorded returns
    let factory = chain_factory();
    let agent = dqn_agent(10, 2, 42, 2);
    let cfg = config(SamplerMode::Serial, 40, 2, 0);
    let mut sampler =
        SerialSampler::new(cfg, agent, factory.as_ref(), 42, Realm::Train { learner: 0 }).unwrap();
    let leaves = rlstack_core::sampler::BatchLeaves::from_spec(sampler.batch_spec());
    let mut col_running = vec![0.0f64; 2];
    let mut recorded: Vec<f64> = Vec::new();
    let mut observed: Vec<f64> = Vec::new();
    for _ in 0..20 {
        let out = sampler.next_batch(None).unwrap();
        for t in 0..40 {
            for b in 0..2 {
                let cell = t * 2 + b;
                // a fresh episode's first row always has zeroed prev fields
                if t > 0 {
                    let prev_cell = (t - 1) * 2 + b;
                    if out.arr.get_bool(leaves.done, prev_cell) {
                        assert_eq!(out.arr.get_i64(leaves.prev_action, cell), 0);
                        assert_eq!(out.arr.get_f32(leaves.prev_reward, cell), 0.0);
                    }
                }
                col_running[b] += out.arr.get_f32(leaves.reward, cell) as f64;
                if out.arr.get_bool(leaves.done, cell) {
                    observed.push(col_running[b]);
                    col_running[b] = 0.0;
                }
            }
        }
        for tr in &out.traj_infos {
            recorded.push(tr.return_);
        }
    }
    let mut obs_sorted = observed.clone();
    let mut rec_sorted = recorded.clone();
    obs_sorted.sort_by(f64::total_cmp);
    rec_sorted.sort_by(f64::total_cmp);
    assert_eq!(obs_sorted.len(), rec_sorted.len());
    for (a, b) in obs_sorted.iter().zip(&rec_sorted) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn worker_death_surfaces_with_worker_name() {
    struct FailingEnv {
        inner: ChainMdp,
        steps: usize,
    }
    impl Env for FailingEnv {
        fn observation_space(&self) -> rlstack_core::env::Space {
            self.inner.observation_space()
        }
        fn action_space(&self) -> rlstack_core::env::Space {
            self.inner.action_space()
        }
        fn env_info_spec(&self) -> rlstack_core::sarray::StructSpec {
            self.inner.env_info_spec()
        }
        fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f32> {
            self.inner.reset(rng)
        }
        fn step(
            &mut self,
            action: &rlstack_core::env::Action,
            rng: &mut ChaCha8Rng,
        ) -> rlstack_core::error::Result<rlstack_core::env::EnvStep> {
            self.steps += 1;
            if self.steps > 12 {
                return Err(rlstack_core::error::Error::InvalidAction("env exploded".into()));
            }
            self.inner.step(action, rng)
        }
    }
    let factory: Arc<EnvFactory> = Arc::new(|slot| {
        if slot == 3 {
            Box::new(FailingEnv { inner: ChainMdp::new(10), steps: 0 }) as Box<dyn Env>
        } else {
            Box::new(ChainMdp::new(10)) as Box<dyn Env>
        }
    });
    let agent = dqn_agent(10, 2, 9, 4);
    let cfg = config(SamplerMode::ParallelDecentralized, 10, 4, 2);
    let mut sampler =
        DecentralizedSampler::new(cfg, agent, factory, 9, Realm::Train { learner: 0 }).unwrap();
    let first = sampler.next_batch(None).unwrap();
    assert_eq!(first.arr.leading(), &[10, 4]);
    let err = match sampler.next_batch(None) {
        Ok(_) => panic!("expected worker failure"),
        Err(e) => e,
    };
    match err {
        rlstack_core::error::Error::WorkerDied(w, msg) => {
            assert_eq!(w, 1, "slot 3 belongs to worker 1");
            assert!(msg.contains("env exploded") || msg.contains("t="), "msg: {msg}");
        }
        other => panic!("expected WorkerDied, got {other}"),
    }
}

#[test]
fn alternating_schedule_strictly_interleaves() {
    let factory = chain_factory();
    let agent = dqn_agent(10, 2, 3, 4);
    let cfg = config(SamplerMode::Alternating, 6, 4, 2);
    let mut sampler =
        AlternatingSampler::new(cfg, agent, factory, 3, Realm::Train { learner: 0 }).unwrap();
    sampler.next_batch(None).unwrap();
    let sched = &sampler.schedule;
    use rlstack_core::sampler::ScheduleEvent::*;
    assert_eq!(sched.len(), 6 * 6);
    for row in sched.chunks(6) {
        assert_eq!(row, &[Act(0), Dispatch(0), Act(1), Dispatch(1), Receive(0), Receive(1)]);
    }
    sampler.shutdown();
}

#[test]
fn evaluation_is_deterministic_and_isolated() {
    let factory = chain_factory();
    let agent = dqn_agent(10, 2, 21, 2);
    let cfg = config(SamplerMode::Serial, 10, 2, 0);
    let mut sampler =
        SerialSampler::new(cfg, agent, factory.as_ref(), 21, Realm::Train { learner: 0 }).unwrap();
    let before = sampler.next_batch(None).unwrap();

    let s1 = rlstack_core::sampler::evaluate(
        sampler.agent(),
        factory.as_ref(),
        4,
        200,
        0.99,
        21,
        Realm::Train { learner: 0 },
    )
    .unwrap();
    let s2 = rlstack_core::sampler::evaluate(
        sampler.agent(),
        factory.as_ref(),
        4,
        200,
        0.99,
        21,
        Realm::Train { learner: 0 },
    )
    .unwrap();
    assert_eq!(s1, s2, "same seed, identical summary");

    // training streams are untouched by evaluation: a fresh sampler that
    // never evaluated produces the identical next batch
    let after = sampler.next_batch(None).unwrap();
    let agent2 = dqn_agent(10, 2, 21, 2);
    let cfg2 = config(SamplerMode::Serial, 10, 2, 0);
    let mut sampler2 =
        SerialSampler::new(cfg2, agent2, factory.as_ref(), 21, Realm::Train { learner: 0 }).unwrap();
    let b1 = sampler2.next_batch(None).unwrap();
    let b2 = sampler2.next_batch(None).unwrap();
    assert!(before.arr == b1.arr);
    assert!(after.arr == b2.arr, "evaluate perturbed the training streams");
}
