//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Pass criterion numbers as arguments to run a subset.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use clickrec::agent::dqn::{DqnAgent, DqnConfig, LossKind, ReplayMemory, Transition};
use clickrec::agent::pg::{discounted_returns, run_pg_episode, sample_action, PgAgent, PgConfig};
use clickrec::agent::{run_random_episode, RecEnv};
use clickrec::env::{EnvConfig, EnvError, Environment, Phase, StepResult};
use clickrec::harness::{
    compare_ratio, final_score, gradcheck_suite, run_experiment, AggregateSeries, AgentKind,
    CtrSeries, ExperimentConfig, ExperimentResult,
};
use clickrec::nn::loss::huber_elementwise;
use clickrec::nn::{huber_loss, Activation, LayerSpec};
use clickrec::{Network, Tensor};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;
type Criterion = (usize, &'static str, fn() -> Verdict);

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, verdict: Verdict) -> Verdict {
    let elapsed = start.elapsed();
    let timed = |d: String| format!("{d}; {:.1}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
    match verdict {
        Ok(d) if elapsed <= limit => Ok(timed(d)),
        Ok(d) => Err(format!("too slow: {}", timed(d))),
        Err(d) => Err(timed(d)),
    }
}

// Network sizes for the learning-curve criteria; single-core budgets rule
// out the 64-unit defaults. The DQN optimizes immediate clicks and keeps its
// whole history in replay.
fn desk_dqn() -> DqnConfig {
    DqnConfig {
        gamma: 0.0,
        learning_rate: 1e-4,
        replay_capacity: 100_000,
        history_length: 10,
        embedding_dim: 8,
        hidden_units: 16,
        minibatch_size: 16,
        ..DqnConfig::default()
    }
}

fn desk_pg() -> PgConfig {
    PgConfig {
        history_length: 10,
        embedding_dim: 8,
        lstm_units: 16,
        dense_units: 16,
        ..PgConfig::default()
    }
}

fn experiment(agent: AgentKind, env: EnvConfig, episodes: usize, seed_base: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(agent, env, episodes);
    c.runs = 5;
    c.seed_base = seed_base;
    c.dqn = desk_dqn();
    c.pg = desk_pg();
    c
}

fn run(c: &ExperimentConfig) -> Result<ExperimentResult, String> {
    run_experiment(c).map_err(|e| e.to_string())
}

fn c1_gradient_fidelity() -> Verdict {
    let start = Instant::now();
    let cases = gradcheck_suite(1e-4).map_err(|e| e.to_string())?;
    let required = [
        "dense", "conv1d", "lstm-2-steps", "lstm-5-steps", "mse", "huber-quadratic",
        "huber-linear", "weighted-cross-entropy",
    ];
    let missing: Vec<_> = required
        .iter()
        .filter(|r| !cases.iter().any(|c| c.name == **r))
        .collect();
    let worst = cases
        .iter()
        .map(|c| (c.report.max_relative_error, c.name))
        .fold((0.0, ""), |a, b| if b.0 > a.0 { b } else { a });
    let failed: Vec<_> = cases.iter().filter(|c| !c.report.passed).map(|c| c.name).collect();
    within(
        Duration::from_secs(60),
        start,
        check(
            missing.is_empty() && failed.is_empty(),
            format!("{} cases, worst {:.2e} ({}), failed {failed:?}, missing {missing:?}", cases.len(), worst.0, worst.1),
        ),
    )
}

fn c2_huber_contract() -> Verdict {
    let delta = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let residuals: Vec<f64> = (0..10_000).map(|_| rng.random_range(-8.0..8.0)).collect();
    let mut bad = 0;
    let mut quadratic = 0;
    for &e in &residuals {
        let (loss, _) = huber_elementwise(e, delta);
        if e.abs() <= delta {
            quadratic += 1;
            bad += usize::from(loss != 0.5 * e * e);
        } else {
            bad += usize::from((loss - (delta * e.abs() - 0.5 * delta * delta)).abs() > 1e-12);
        }
    }
    // The vector loss is the mean of the same elementwise terms.
    let pred = Tensor::from_vec(residuals.clone());
    let (mean, grad) = huber_loss(&pred, &Tensor::zeros(&[residuals.len()]), delta).map_err(|e| e.to_string())?;
    let n = residuals.len() as f64;
    let direct = residuals.iter().map(|&e| huber_elementwise(e, delta).0).sum::<f64>() / n;
    let grad_ok = residuals
        .iter()
        .zip(grad.data())
        .all(|(&e, &g)| (g - e.clamp(-delta, delta) / n).abs() <= 1e-15);
    let mut jump: f64 = 0.0;
    for side in [-1.0, 1.0] {
        for h in [1e-7, 1e-9, 1e-12] {
            let (lo, glo) = huber_elementwise(side * (delta - h), delta);
            let (hi, ghi) = huber_elementwise(side * (delta + h), delta);
            jump = jump.max((hi - lo).abs()).max((ghi - glo).abs());
        }
    }
    check(
        bad == 0 && (mean - direct).abs() <= 1e-12 && grad_ok && jump <= 1e-6,
        format!("{bad} mismatches over 10000 residuals ({quadratic} quadratic), max jump at |e|=2 {jump:.1e}, vector form ok {grad_ok}"),
    )
}

// Episodic MDP on four states and three actions; `None` ends the episode.
const NEXT: [[Option<usize>; 3]; 4] = [
    [Some(1), Some(2), None],
    [Some(3), Some(0), None],
    [Some(3), Some(1), None],
    [None, Some(0), Some(2)],
];
const REWARD: [[u8; 3]; 4] = [[0, 0, 1], [0, 0, 0], [1, 0, 0], [1, 1, 0]];

fn value_iteration(gamma: f64) -> [[f64; 3]; 4] {
    let mut q = [[0.0; 3]; 4];
    loop {
        let mut next_q = [[0.0; 3]; 4];
        for s in 0..4 {
            for a in 0..3 {
                let future = NEXT[s][a].map_or(0.0, |n| q[n].iter().cloned().fold(f64::MIN, f64::max));
                next_q[s][a] = f64::from(REWARD[s][a]) + gamma * future;
            }
        }
        let change = (0..4)
            .flat_map(|s| (0..3).map(move |a| (s, a)))
            .map(|(s, a)| (next_q[s][a] - q[s][a]).abs())
            .fold(0.0, f64::max);
        q = next_q;
        if change < 1e-12 {
            return q;
        }
    }
}

fn one_hot(s: usize) -> Tensor {
    let mut t = Tensor::zeros(&[4]);
    t[s] = 1.0;
    t
}

/// Trains a linear Q head on one-hot states from a uniformly random behaviour
/// policy; returns the first step count at which L∞ ≤ 0.05 and the final gap.
fn tabular_run(seed: u64, q_star: &[[f64; 3]; 4]) -> Result<(Option<usize>, f64), String> {
    const STEPS: usize = 50_000;
    const MAX_EPISODE: usize = 20;
    let config = DqnConfig {
        gamma: 0.9,
        ..DqnConfig::default()
    };
    let net = Network::new(vec![LayerSpec::dense(4, 3, Activation::Identity)], seed).map_err(|e| e.to_string())?;
    let mut agent = DqnAgent::with_network(config, net, seed).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = |agent: &DqnAgent| -> Result<f64, String> {
        let mut g: f64 = 0.0;
        for (s, row) in q_star.iter().enumerate() {
            let q = agent.q_values(&one_hot(s)).map_err(|e| e.to_string())?;
            for a in 0..3 {
                g = g.max((q[a] - row[a]).abs());
            }
        }
        Ok(g)
    };
    let (mut s, mut t, mut reached) = (rng.random_range(0..4), 0, None);
    for step in 1..=STEPS {
        let a = agent.act(&one_hot(s), 1.0).map_err(|e| e.to_string())?;
        let next = NEXT[s][a];
        agent.remember(Transition {
            state: one_hot(s),
            action: a,
            reward: REWARD[s][a],
            next_state: one_hot(next.unwrap_or(s)),
            terminal: next.is_none(),
        });
        agent.train_step().map_err(|e| e.to_string())?;
        t += 1;
        match next {
            Some(n) if t < MAX_EPISODE => s = n,
            _ => {
                s = rng.random_range(0..4);
                t = 0;
            }
        }
        if reached.is_none() && step % 500 == 0 && gap(&agent)? <= 0.05 {
            reached = Some(step);
        }
    }
    Ok((reached, gap(&agent)?))
}

fn c3_tabular_oracle() -> Verdict {
    let start = Instant::now();
    let q_star = value_iteration(0.9);
    let mut notes = Vec::new();
    let mut all = true;
    for seed in [1, 2, 3] {
        let (reached, last) = tabular_run(seed, &q_star)?;
        all &= reached.is_some();
        notes.push(format!("seed {seed}: reached at {reached:?}, final L∞ {last:.4}"));
    }
    within(Duration::from_secs(300), start, check(all, notes.join("; ")))
}

/// One bandit decision per episode between two items.
struct TwoArmed {
    probs: [f64; 2],
    rng: ChaCha8Rng,
}

impl RecEnv for TwoArmed {
    fn num_items(&self) -> usize {
        2
    }

    fn reset(&mut self) -> StepResult {
        StepResult { observation: Vec::new(), reward: 0, done: false, phase: Phase::Bandit }
    }

    fn step(&mut self, action: Option<usize>) -> Result<StepResult, EnvError> {
        let a = action.ok_or(EnvError::Protocol("bandit step needs an action"))?;
        let p = *self.probs.get(a).ok_or(EnvError::InvalidAction { action: a, num_items: 2 })?;
        let reward = u8::from(self.rng.random_bool(p));
        Ok(StepResult { observation: Vec::new(), reward, done: true, phase: Phase::Terminal })
    }
}

fn c4_pg_bandit() -> Verdict {
    let start = Instant::now();
    // With one decision per episode, standardizing returns would zero every
    // weight, so the raw click is the return.
    let config = PgConfig {
        normalize_returns: false,
        ..PgConfig::default()
    };
    let mut notes = Vec::new();
    let mut all = true;
    for seed in 1..=5u64 {
        let mut agent = PgAgent::new(config.clone(), 2, seed).map_err(|e| e.to_string())?;
        let mut env = TwoArmed { probs: [0.8, 0.2], rng: ChaCha8Rng::seed_from_u64(seed + 100) };
        let state = agent.encode(&[]).map_err(|e| e.to_string())?;
        let mut reached = None;
        for episode in 1..=2000 {
            run_pg_episode(&mut agent, &mut env, true).map_err(|e| e.to_string())?;
            let p = agent.action_distribution(&state).map_err(|e| e.to_string())?[0];
            if p > 0.95 {
                reached = Some(episode);
                break;
            }
        }
        all &= reached.is_some();
        notes.push(format!("seed {seed}: {reached:?}"));
    }
    within(Duration::from_secs(120), start, check(all, format!("episodes to π(better) > 0.95: {}", notes.join(", "))))
}

fn c5_calibration() -> Verdict {
    let mut notes = Vec::new();
    let mut all = true;
    for n in [100, 1000] {
        let config = EnvConfig::with_size(n, n, 77);
        let target = config.target_random_ctr;
        let mut env = Environment::new(config).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut steps, mut clicks) = (0, 0);
        while steps < 10_000 {
            let s = run_random_episode(&mut env, &mut rng).map_err(|e| e.to_string())?;
            steps += s.bandit_steps;
            clicks += s.clicks;
        }
        let ctr = clicks as f64 / steps as f64;
        all &= (ctr - target).abs() <= 0.005;
        notes.push(format!("{n}x{n}: {ctr:.4} over {steps} steps"));
    }
    check(all, notes.join("; "))
}

fn c6_learning_beats_random() -> Verdict {
    let start = Instant::now();
    let env = EnvConfig::with_size(100, 100, 0);
    let dqn = run(&experiment(AgentKind::DqnLstm, env.clone(), 2000, 600))?;
    let random = run(&experiment(AgentKind::Random, env, 2000, 600))?;
    let ratio = compare_ratio(&dqn.aggregate, &random.aggregate).map_err(|e| e.to_string())?;
    within(
        Duration::from_secs(1800),
        start,
        check(
            ratio.value >= 1.5,
            format!(
                "DQN-LSTM {:.5} vs random {:.5}, ratio {:.3} (need ≥ 1.5)",
                final_score(&dqn.aggregate).mean,
                final_score(&random.aggregate).mean,
                ratio.value
            ),
        ),
    )
}

const LARGE_EPISODES: usize = 500;
const LARGE_SEED: u64 = 700;

fn large_env() -> EnvConfig {
    EnvConfig::with_size(1000, 1000, 0)
}

fn c7_huber_vs_mse(huber: &ExperimentResult) -> Verdict {
    let start = Instant::now();
    let mut c = experiment(AgentKind::DqnLstm, large_env(), LARGE_EPISODES, LARGE_SEED);
    c.loss = LossKind::Mse;
    let mse = run(&c)?;
    let ratio = compare_ratio(&huber.aggregate, &mse.aggregate).map_err(|e| e.to_string())?;
    check(
        ratio.value >= 1.0,
        format!(
            "Huber {:.5} vs MSE {:.5}, ratio {:.3} (need ≥ 1.0); MSE arm {:.0}s",
            final_score(&huber.aggregate).mean,
            final_score(&mse.aggregate).mean,
            ratio.value,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn tail_std(run: &CtrSeries) -> f64 {
    final_score(&AggregateSeries::from_runs(std::slice::from_ref(run)).expect("one run")).std
}

fn c8_pg_stability(dqn: &ExperimentResult) -> Verdict {
    let pg = run(&experiment(AgentKind::Pg, large_env(), LARGE_EPISODES, LARGE_SEED))?;
    let pairs: Vec<(f64, f64)> = pg.runs.iter().zip(&dqn.runs).map(|(p, d)| (tail_std(p), tail_std(d))).collect();
    let wins = pairs.iter().filter(|(p, d)| p <= d).count();
    let shown: Vec<String> = pairs.iter().map(|(p, d)| format!("{p:.4}/{d:.4}")).collect();
    check(wins >= 4, format!("PG ≤ DQN-LSTM tail std in {wins}/5 seeds (PG/DQN: {})", shown.join(", ")))
}

fn csv_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable output dir") {
            let p = entry.expect("dir entry").path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                let name = p.strip_prefix(dir).expect("inside dir").display().to_string();
                out.push((name, fs::read(&p).expect("readable csv")));
            }
        }
    }
    out.sort();
    out
}

fn c9_determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    let mut all = true;
    for agent in ["dqn-lstm", "pg"] {
        let mut trees = Vec::new();
        for (i, extra) in [None, None, Some("--serial")].into_iter().enumerate() {
            let out = tmp.path().join(format!("{agent}-{i}"));
            let mut cmd = Command::new(env!("CARGO_BIN_EXE_clickrec"));
            cmd.args(["train", "--agent", agent, "--users", "30", "--items", "20", "--episodes", "15"])
                .args(["--runs", "4", "--seed", "9", "--history-len", "6", "--hidden-units", "8"])
                .args(["--embedding-dim", "4", "--batch-size", "8", "--out"])
                .arg(&out);
            cmd.args(extra);
            let status = cmd.output().map_err(|e| e.to_string())?.status;
            if !status.success() {
                return Err(format!("train {agent} exited with {status}"));
            }
            trees.push(csv_tree(&out));
        }
        let same = trees[0].len() == 5 && trees[0] == trees[1] && trees[0] == trees[2];
        all &= same;
        notes.push(format!("{agent}: {} CSV files identical across 2 parallel + 1 serial runs: {same}", trees[0].len()));
    }
    check(all, notes.join("; "))
}

fn property<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<String, String> {
    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    runner
        .run(&strategy, test)
        .map(|()| format!("{name} 1000/1000"))
        .map_err(|e| format!("{name}: {e}"))
}

fn fifo_case((capacity, extra): (usize, usize)) -> Result<(), TestCaseError> {
    let mut memory = ReplayMemory::new(capacity);
    let t = |i: usize| Transition {
        state: Tensor::zeros(&[1]),
        action: i,
        reward: 0,
        next_state: Tensor::zeros(&[1]),
        terminal: false,
    };
    for i in 0..capacity + extra {
        memory.push(t(i));
    }
    let held: Vec<usize> = memory.iter().map(|t| t.action).collect();
    prop_assert_eq!(held, (extra..extra + capacity).collect::<Vec<_>>());
    Ok(())
}

fn epsilon_case((horizon, step): (f64, usize)) -> Result<(), TestCaseError> {
    let c = DqnConfig { epsilon_horizon: horizon, ..DqnConfig::default() };
    let e = c.epsilon(step);
    prop_assert!((0.1..=0.9).contains(&e), "ε {} at step {}", e, step);
    prop_assert_eq!(c.epsilon(0), 0.9);
    prop_assert_eq!(c.epsilon(horizon.ceil() as usize), 0.1);
    Ok(())
}

/// Drives one episode by hand so every policy distribution can be inspected.
fn softmax_case((seed, items): (u64, usize)) -> Result<(), TestCaseError> {
    let config = PgConfig {
        history_length: 5,
        embedding_dim: 3,
        lstm_units: 4,
        dense_units: 4,
        ..PgConfig::default()
    };
    let agent = PgAgent::new(config, items, seed).expect("valid agent");
    let mut env = Environment::new(EnvConfig::with_size(8, items, seed)).expect("valid env");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = env.reset();
    while r.phase != Phase::Terminal {
        let action = if r.phase == Phase::Bandit {
            let dist = agent.action_distribution(&agent.encode(&r.observation).expect("in catalog")).expect("forward");
            let sum: f64 = dist.data().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "sum {}", sum);
            prop_assert!(dist.data().iter().all(|p| (0.0..=1.0).contains(p)));
            Some(sample_action(&dist, &mut rng))
        } else {
            None
        };
        r = env.step(action).expect("valid step");
    }
    Ok(())
}

fn returns_case((rewards, gamma): (Vec<u8>, f64)) -> Result<(), TestCaseError> {
    let r: Vec<f64> = rewards.iter().map(|&x| f64::from(x)).collect();
    let g = discounted_returns(&r, gamma);
    prop_assert_eq!(g.len(), r.len());
    for t in 0..r.len() {
        let next = g.get(t + 1).copied().unwrap_or(0.0);
        let expect = r[t] + gamma * next;
        prop_assert!((g[t] - expect).abs() <= 1e-12 * expect.abs().max(1.0), "t {}: {} vs {}", t, g[t], expect);
    }
    Ok(())
}

fn c10_invariants() -> Verdict {
    let results = [
        property("FIFO eviction", (1usize..64, 0usize..200), fifo_case),
        property("ε schedule", (1.0f64..300.0, 0usize..2000), epsilon_case),
        property("softmax at PG decisions", (any::<u64>(), 2usize..40), softmax_case),
        property("return recursion", (prop::collection::vec(0u8..=1, 0..300), 0.0f64..=1.0), returns_case),
    ];
    let ok = results.iter().all(Result::is_ok);
    let notes: Vec<String> = results.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect();
    check(ok, notes.join("; "))
}

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);
    let mut failures = 0;
    let mut report = |n: usize, name: &str, verdict: Verdict| {
        match &verdict {
            Ok(d) => println!("PASS [{n}] {name}: {d}"),
            Err(d) => {
                failures += 1;
                println!("FAIL [{n}] {name}: {d}")
            }
        }
    };
    let simple: [Criterion; 7] = [
        (1, "gradient fidelity", c1_gradient_fidelity),
        (2, "Huber contract", c2_huber_contract),
        (3, "tabular Q oracle", c3_tabular_oracle),
        (4, "PG two-armed bandit", c4_pg_bandit),
        (5, "environment calibration", c5_calibration),
        (6, "DQN-LSTM beats random", c6_learning_beats_random),
        (9, "determinism", c9_determinism),
    ];
    for (n, name, f) in simple {
        if wanted(n) {
            report(n, name, f());
        }
    }
    if wanted(7) || wanted(8) {
        // Both comparisons reuse the Huber DQN-LSTM runs at 1000 × 1000.
        let start = Instant::now();
        match run(&experiment(AgentKind::DqnLstm, large_env(), LARGE_EPISODES, LARGE_SEED)) {
            Ok(huber) => {
                let shared = start.elapsed().as_secs_f64();
                if wanted(7) {
                    report(7, "Huber vs MSE", c7_huber_vs_mse(&huber).map(|d| format!("{d}; Huber arm {shared:.0}s")));
                }
                if wanted(8) {
                    report(8, "PG stability", c8_pg_stability(&huber));
                }
            }
            Err(e) => {
                for (n, name) in [(7, "Huber vs MSE"), (8, "PG stability")] {
                    if wanted(n) {
                        report(n, name, Err(e.clone()));
                    }
                }
            }
        }
    }
    if wanted(10) {
        report(10, "replay and schedule invariants", c10_invariants());
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
