mod args;

use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use clickrec::agent::dqn::LossKind;
use clickrec::env::EnvConfig;
use clickrec::harness::{
    csv_io, evaluate_checkpoint, final_score, gradcheck_suite, run_experiment, run_sweep,
    ExperimentConfig, SweepConfig,
};
use log::warn;

use args::{Cli, Command, EvalArgs, GradcheckArgs, SweepArgs, TrainArgs};

const DESK_SCALE_LIMIT: usize = 1_000;

enum Failure {
    Usage(anyhow::Error),
    Run(anyhow::Error),
    GradCheck,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 1,
            Self::Run(_) => 2,
            Self::GradCheck => 3,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn run_failure<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Run(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Eval(a) => eval(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Run(e) => eprintln!("run failed: {e:#}"),
                Failure::GradCheck => eprintln!("gradient check failed"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn check_scale(sizes: &[usize], full_scale: bool) -> anyhow::Result<()> {
    if let Some(&big) = sizes.iter().find(|&&n| n > DESK_SCALE_LIMIT) {
        if !full_scale {
            bail!("size {big} exceeds {DESK_SCALE_LIMIT}; pass --full-scale to run it anyway");
        }
        warn!("full-scale run with {big} users or items: expect hours of compute and gigabytes of memory");
    }
    Ok(())
}

fn env_config(users: usize, items: usize, features: Option<usize>, click_scale: Option<f64>, seed: u64) -> EnvConfig {
    let mut env = EnvConfig::with_size(users, items, seed);
    if let Some(f) = features {
        env.num_features = f;
    }
    if let Some(c) = click_scale {
        env.click_scale = c;
    }
    env
}

fn train(args: TrainArgs) -> Outcome {
    let a = args.resolve().map_err(usage)?;
    let (users, items) = (a.users.unwrap_or(100), a.items.unwrap_or(100));
    check_scale(&[users, items], a.full_scale).map_err(usage)?;
    let seed = a.seed.unwrap_or(0);
    let env = env_config(users, items, a.features, a.click_scale, seed);
    let agent = a.agent.expect("resolved");
    let mut c = ExperimentConfig::new(agent, env, a.episodes.unwrap_or(1_000));
    c.loss = a.loss.unwrap_or(LossKind::Huber);
    c.runs = a.runs.unwrap_or(c.runs);
    c.seed_base = seed;
    c.output_dir = a.out.clone();
    c.parallel = !a.serial;
    c.checkpoint = true;
    let (d, p) = (&mut c.dqn, &mut c.pg);
    if let Some(v) = a.gamma {
        d.gamma = v;
        p.gamma = v;
    }
    if let Some(v) = a.lr {
        d.learning_rate = v;
        p.learning_rate = v;
    }
    if let Some(v) = a.history_len {
        d.history_length = v;
        p.history_length = v;
    }
    if let Some(v) = a.embedding_dim {
        d.embedding_dim = v;
        p.embedding_dim = v;
    }
    if let Some(v) = a.hidden_units {
        d.hidden_units = v;
        p.lstm_units = v;
        p.dense_units = v;
    }
    d.minibatch_size = a.batch_size.unwrap_or(d.minibatch_size);
    d.replay_capacity = a.replay_capacity.unwrap_or(d.replay_capacity);
    d.epsilon_horizon = a.epsilon_horizon.unwrap_or(d.epsilon_horizon);
    d.huber_delta = a.huber_delta.unwrap_or(d.huber_delta);
    d.use_target_network = a.target_network.unwrap_or(d.use_target_network);
    d.target_sync_interval = a.target_sync_interval.unwrap_or(d.target_sync_interval);
    p.normalize_returns = a.normalize_returns.unwrap_or(p.normalize_returns);
    p.episodes_per_update = a.episodes_per_update.unwrap_or(p.episodes_per_update);
    c.validate().map_err(usage)?;

    let result = run_experiment(&c).map_err(run_failure)?;
    let score = final_score(&result.aggregate);
    println!(
        "{agent}: final score {:.6} (tail std {:.6}) over {} runs; outputs in {}",
        score.mean,
        score.std,
        c.runs,
        a.out.expect("resolved").display()
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Outcome {
    let a = args.resolve().map_err(usage)?;
    let default_axis = vec![10, 100, 1_000];
    let user_axis = a.user_axis.unwrap_or_else(|| default_axis.clone());
    let item_axis = a.item_axis.unwrap_or(default_axis);
    check_scale(&[&user_axis[..], &item_axis[..]].concat(), a.full_scale).map_err(usage)?;
    let agents = a
        .agents
        .unwrap_or_else(|| clickrec::harness::AgentKind::ALL.to_vec());
    let mut s = SweepConfig::new(agents, user_axis, item_axis, a.episodes.unwrap_or(500), a.runs.unwrap_or(5));
    s.template.seed_base = a.seed.unwrap_or(0);
    s.template.loss = a.loss.unwrap_or(LossKind::Huber);
    s.template.parallel = !a.serial;
    if let Some(f) = a.features {
        s.template.env.num_features = f;
    }
    if let Some(c) = a.click_scale {
        s.template.env.click_scale = c;
    }
    s.output_dir = a.out.clone();
    let grid = match run_sweep(&s) {
        Ok(g) => g,
        Err(e @ clickrec::harness::HarnessError::Config(_)) => return Err(usage(e)),
        Err(e) => return Err(run_failure(e)),
    };
    for r in &grid.rows {
        println!("{:>6} users {:>6} items {:>9}: {:.6} ± {:.6}", r.users, r.items, r.agent, r.score_mean, r.score_std);
    }
    if !grid.failures.is_empty() {
        for f in &grid.failures {
            eprintln!("{} users {} items {}: {}", f.users, f.items, f.agent, f.error);
        }
        return Err(run_failure(anyhow::anyhow!("{} sweep cells failed", grid.failures.len())));
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Outcome {
    if a.tolerance.is_nan() || a.tolerance <= 0.0 {
        return Err(usage(anyhow::anyhow!("--tolerance must be positive")));
    }
    let cases = gradcheck_suite(a.tolerance).map_err(run_failure)?;
    let mut ok = true;
    for c in &cases {
        let verdict = if c.report.passed { "ok" } else { "FAIL" };
        println!(
            "{:<24} {:>4}  max rel err {:.3e} over {} parameters",
            c.name, verdict, c.report.max_relative_error, c.report.checked
        );
        ok &= c.report.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::GradCheck)
    }
}

fn eval(args: EvalArgs) -> Outcome {
    let a = args.resolve().map_err(usage)?;
    let (users, items) = (a.users.unwrap_or(100), a.items.unwrap_or(100));
    check_scale(&[users, items], a.full_scale).map_err(usage)?;
    let env = env_config(users, items, a.features, a.click_scale, a.seed.unwrap_or(0));
    let model = a.model.expect("resolved");
    let series = evaluate_checkpoint(&model, env, a.episodes.unwrap_or(100))
        .with_context(|| format!("evaluating {}", model.display()))
        .map_err(run_failure)?;
    let mean = series.values.iter().sum::<f64>() / series.len().max(1) as f64;
    println!("mean episode CTR {mean:.6} over {} episodes", series.len());
    if let Some(out) = a.out {
        csv_io::write_run(&series, &out).map_err(run_failure)?;
    }
    Ok(())
}
