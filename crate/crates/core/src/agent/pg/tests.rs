use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{EnvConfig, Environment};
use crate::nn::gradcheck::{compare_gradients, numeric_gradients, FD_STEP};

fn small_config() -> PgConfig {
    PgConfig {
        history_length: 4,
        embedding_dim: 3,
        lstm_units: 4,
        dense_units: 4,
        normalize_returns: false,
        ..PgConfig::default()
    }
}

fn step(agent: &PgAgent, history: &[usize], action: usize, reward: u8) -> TrajectoryStep {
    let state = agent.encode(history).unwrap();
    let p = agent.action_distribution(&state).unwrap()[action];
    TrajectoryStep {
        state,
        action,
        reward,
        action_probability: p,
    }
}

#[test]
fn fresh_policy_is_near_uniform() {
    for items in [10, 100, 1000] {
        let agent = PgAgent::new(PgConfig::default(), items, 5).unwrap();
        let uniform = 1.0 / items as f64;
        for history in [vec![], vec![0, 1, 2], (0..30).map(|i| i % items).collect()] {
            let p = agent.action_distribution(&agent.encode(&history).unwrap()).unwrap();
            assert!(
                p.data().iter().all(|&x| x > uniform / 2.0 && x < uniform * 2.0),
                "{items} items"
            );
        }
    }
}

#[test]
fn distribution_is_deterministic() {
    let agent = PgAgent::new(small_config(), 6, 1).unwrap();
    let s = agent.encode(&[1, 5, 2]).unwrap();
    assert_eq!(agent.action_distribution(&s).unwrap(), agent.action_distribution(&s).unwrap());
}

#[test]
fn sampling_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let point = Tensor::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
    assert!((0..1000).all(|_| sample_action(&point, &mut rng) == 2));
    let half = Tensor::from_vec(vec![0.5, 0.5, 0.0]);
    assert!((0..10_000).all(|_| sample_action(&half, &mut rng) != 2));
    let uniform = Tensor::from_vec(vec![0.1; 10]);
    let mut counts = [0usize; 10];
    for _ in 0..100_000 {
        counts[sample_action(&uniform, &mut rng)] += 1;
    }
    assert!(counts.iter().all(|&c| (c as f64 / 100_000.0 - 0.1).abs() < 0.01));
}

#[test]
fn returns_examples() {
    assert_eq!(discounted_returns(&[0.0, 0.0, 1.0], 0.5), vec![0.25, 0.5, 1.0]);
    assert_eq!(discounted_returns(&[1.0, 0.0, 1.0], 0.0), vec![1.0, 0.0, 1.0]);
    assert_eq!(discounted_returns(&[1.0; 4], 1.0), vec![4.0, 3.0, 2.0, 1.0]);
    assert!(discounted_returns(&[], 0.9).is_empty());
}

#[test]
fn zero_returns_leave_policy_unchanged() {
    let mut agent = PgAgent::new(small_config(), 5, 3).unwrap();
    let steps = vec![step(&agent, &[1], 2, 0), step(&agent, &[1, 3], 4, 0)];
    let before = agent.network().clone();
    let out = agent.policy_update(&[Trajectory::new(steps, 0.9)]).unwrap();
    assert_eq!(out, UpdateOutcome::Updated { loss: 0.0 });
    assert_eq!(agent.network(), &before);
}

#[test]
fn empty_batch_is_skipped() {
    let mut agent = PgAgent::new(small_config(), 5, 3).unwrap();
    assert_eq!(agent.policy_update(&[]).unwrap(), UpdateOutcome::Skipped);
    let empty = Trajectory::new(Vec::new(), 0.9);
    assert_eq!(agent.policy_update(&[empty]).unwrap(), UpdateOutcome::Skipped);
}

#[test]
fn update_direction_follows_return_sign() {
    for optimizer in [OptimizerKind::Adam, OptimizerKind::Sgd] {
        for (reward, gamma) in [(1u8, 0.9), (0u8, 0.9)] {
            let config = PgConfig { optimizer, learning_rate: 1e-2, ..small_config() };
            let mut agent = PgAgent::new(config, 5, 7).unwrap();
            let s = step(&agent, &[0, 4], 1, reward);
            let before = s.action_probability;
            let mut traj = Trajectory::new(vec![s.clone()], gamma);
            if reward == 0 {
                // Negative return: penalize the action.
                traj.returns = vec![-1.0];
            }
            agent.policy_update(&[traj]).unwrap();
            let after = agent.action_distribution(&s.state).unwrap()[1];
            if reward == 1 {
                assert!(after > before, "{optimizer:?}");
            } else {
                assert!(after < before, "{optimizer:?}");
            }
        }
    }
}

#[test]
fn update_gradient_matches_finite_differences() {
    for normalize in [false, true] {
        let config = PgConfig { normalize_returns: normalize, ..small_config() };
        let mut agent = PgAgent::new(config, 4, 13).unwrap();
        let steps = vec![
            step(&agent, &[0], 1, 0),
            step(&agent, &[0, 2], 3, 1),
            step(&agent, &[0, 2, 1], 1, 1),
        ];
        let batch = vec![Trajectory::new(steps, 0.8)];
        let (_, analytic) = agent.objective_gradients(&batch).unwrap();
        let weights = agent.step_weights(&batch);
        let mut net = agent.network().clone();
        let numeric = numeric_gradients(&mut net, FD_STEP, |n| {
            batch[0]
                .steps()
                .iter()
                .zip(&weights)
                .map(|(s, w)| -w * n.predict(&s.state).unwrap()[s.action].ln())
                .sum()
        });
        let report = compare_gradients(&analytic, &numeric, 1e-4);
        assert!(report.passed, "{report:?}");
    }
}

#[test]
fn evaluation_does_not_train() {
    let env_cfg = EnvConfig { target_random_ctr: 0.2, ..EnvConfig::with_size(10, 6, 1) };
    let mut env = Environment::new(env_cfg).unwrap();
    let mut agent = PgAgent::new(small_config(), 6, 2).unwrap();
    let before = agent.network().clone();
    for _ in 0..5 {
        let s = run_pg_episode(&mut agent, &mut env, false).unwrap();
        assert!(s.clicks <= s.bandit_steps);
    }
    assert_eq!(agent.network(), &before);
    let mut trained = false;
    for _ in 0..5 {
        let s = run_pg_episode(&mut agent, &mut env, true).unwrap();
        trained |= s.clicks > 0;
    }
    assert!(!trained || agent.network() != &before);
}

#[test]
fn update_cadence() {
    let env_cfg = EnvConfig { target_random_ctr: 0.3, ..EnvConfig::with_size(10, 6, 2) };
    let mut env = Environment::new(env_cfg).unwrap();
    let config = PgConfig { episodes_per_update: 3, ..small_config() };
    let mut agent = PgAgent::new(config, 6, 2).unwrap();
    let before = agent.network().clone();
    run_pg_episode(&mut agent, &mut env, true).unwrap();
    run_pg_episode(&mut agent, &mut env, true).unwrap();
    assert_eq!(agent.network(), &before);
    assert_eq!(agent.pending.len(), 2);
    run_pg_episode(&mut agent, &mut env, true).unwrap();
    assert!(agent.pending.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn return_recursion(rewards in proptest::collection::vec(0u8..2, 1..60), gamma in 0.0f64..=1.0) {
        let r: Vec<f64> = rewards.iter().map(|&x| f64::from(x)).collect();
        let g = discounted_returns(&r, gamma);
        prop_assert_eq!(g.len(), r.len());
        prop_assert_eq!(*g.last().unwrap(), *r.last().unwrap());
        for t in 0..r.len() - 1 {
            prop_assert!((g[t] - (r[t] + gamma * g[t + 1])).abs() <= 1e-12);
        }
    }

    #[test]
    fn distributions_are_valid(history in proptest::collection::vec(0usize..7, 0..12), seed in 0u64..1000) {
        let agent = PgAgent::new(small_config(), 7, seed).unwrap();
        let p = agent.action_distribution(&agent.encode(&history).unwrap()).unwrap();
        prop_assert!(p.data().iter().all(|&x| x >= 0.0));
        prop_assert!((p.data().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}
