use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::{save_checkpoint, AgentCheckpoint};
use super::csv_io::{write_aggregate, write_run};
use super::series::{AggregateSeries, CtrSeries};
use super::HarnessError;
use crate::agent::dqn::{run_dqn_episode, DqnAgent, DqnConfig, LossKind, ValueNet};
use crate::agent::pg::{run_pg_episode, PgAgent, PgConfig};
use crate::agent::{run_random_episode, AgentError};
use crate::env::{EnvConfig, Environment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    DqnCnn,
    DqnLstm,
    Pg,
    Random,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [Self::DqnCnn, Self::DqnLstm, Self::Pg, Self::Random];

    pub fn name(self) -> &'static str {
        match self {
            Self::DqnCnn => "dqn-cnn",
            Self::DqnLstm => "dqn-lstm",
            Self::Pg => "pg",
            Self::Random => "random",
        }
    }

    pub fn value_net(self) -> Option<ValueNet> {
        match self {
            Self::DqnCnn => Some(ValueNet::Conv1d),
            Self::DqnLstm => Some(ValueNet::Lstm),
            Self::Pg | Self::Random => None,
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown agent {s:?} (expected dqn-cnn, dqn-lstm, pg or random)"))
    }
}

/// One experiment: `runs` independent (environment, agent) pairs trained for
/// `episodes` episodes each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub agent: AgentKind,
    /// DQN agents only.
    pub loss: LossKind,
    pub env: EnvConfig,
    pub episodes: usize,
    pub runs: usize,
    pub seed_base: u64,
    pub output_dir: Option<PathBuf>,
    pub dqn: DqnConfig,
    pub pg: PgConfig,
    pub parallel: bool,
    /// Save the first run's trained agent under `output_dir/checkpoint`.
    pub checkpoint: bool,
}

impl ExperimentConfig {
    pub fn new(agent: AgentKind, env: EnvConfig, episodes: usize) -> Self {
        Self {
            agent,
            loss: LossKind::Huber,
            env,
            episodes,
            runs: 50,
            seed_base: 0,
            output_dir: None,
            dqn: DqnConfig::default(),
            pg: PgConfig::default(),
            parallel: true,
            checkpoint: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.episodes == 0 || self.runs == 0 {
            return Err(HarnessError::Config("episodes and runs must be at least 1".into()));
        }
        self.env.validate()?;
        match self.agent {
            AgentKind::DqnCnn | AgentKind::DqnLstm => self.dqn_config().validate(),
            AgentKind::Pg => self.pg.validate(),
            AgentKind::Random => Ok(()),
        }
        .map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// The DQN settings with the value network and loss this experiment selects.
    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            value_net: self.agent.value_net().unwrap_or(self.dqn.value_net),
            loss: self.loss,
            ..self.dqn.clone()
        }
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.seed_base.wrapping_add(run as u64)
    }
}

/// Agent RNG and initialization seed for a run, decorrelated from the
/// environment's seed.
pub fn agent_seed(run_seed: u64) -> u64 {
    run_seed ^ 0x9E37_79B9_7F4A_7C15
}

pub enum TrainedAgent {
    Dqn(DqnAgent),
    Pg(PgAgent),
    Random,
}

impl TrainedAgent {
    pub fn checkpoint(&self, kind: AgentKind, seed: u64) -> Option<AgentCheckpoint> {
        match self {
            Self::Dqn(a) => Some(AgentCheckpoint::dqn(kind, a.config().clone(), a.num_items(), seed)),
            Self::Pg(a) => Some(AgentCheckpoint::pg(a.config().clone(), a.num_items(), seed)),
            Self::Random => None,
        }
    }

    pub fn network(&self) -> Option<&crate::Network> {
        match self {
            Self::Dqn(a) => Some(a.network()),
            Self::Pg(a) => Some(a.network()),
            Self::Random => None,
        }
    }
}

/// Trains a fresh agent in a fresh environment for one run.
pub fn run_single(
    config: &ExperimentConfig,
    run: usize,
) -> Result<(CtrSeries, TrainedAgent), HarnessError> {
    let seed = config.run_seed(run);
    let failed = |source: AgentError| HarnessError::Run { seed, source };
    let env_config = EnvConfig {
        seed,
        ..config.env.clone()
    };
    let mut env = Environment::new(env_config).map_err(|e| failed(e.into()))?;
    let items = env.num_items();
    let mut values = Vec::with_capacity(config.episodes);
    let agent = match config.agent {
        AgentKind::DqnCnn | AgentKind::DqnLstm => {
            let mut agent =
                DqnAgent::new(config.dqn_config(), items, agent_seed(seed)).map_err(failed)?;
            for _ in 0..config.episodes {
                values.push(run_dqn_episode(&mut agent, &mut env).map_err(failed)?.ctr());
            }
            TrainedAgent::Dqn(agent)
        }
        AgentKind::Pg => {
            let mut agent =
                PgAgent::new(config.pg.clone(), items, agent_seed(seed)).map_err(failed)?;
            for _ in 0..config.episodes {
                values.push(run_pg_episode(&mut agent, &mut env, true).map_err(failed)?.ctr());
            }
            TrainedAgent::Pg(agent)
        }
        AgentKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(agent_seed(seed));
            for _ in 0..config.episodes {
                values.push(run_random_episode(&mut env, &mut rng).map_err(failed)?.ctr());
            }
            TrainedAgent::Random
        }
    };
    debug!("{} run seed {seed} finished", config.agent);
    Ok((CtrSeries::new(seed, values), agent))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<CtrSeries>,
    pub aggregate: AggregateSeries,
}

/// Per-run curve file name inside `output_dir/runs`.
pub fn run_file_name(seed: u64) -> String {
    format!("run_{seed}.csv")
}

/// Executes every run, aggregates them and, with an output directory, writes
/// `config.json`, `aggregate.csv`, `runs/run_<seed>.csv` and optionally
/// `checkpoint/`.
///
/// Runs share nothing, so parallel and serial execution give identical results.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    config.validate()?;
    info!(
        "{}: {} runs x {} episodes on {}x{}",
        config.agent, config.runs, config.episodes, config.env.num_users, config.env.num_items
    );
    let keep_first = config.checkpoint && config.output_dir.is_some();
    let one = |run: usize| {
        run_single(config, run).map(|(series, agent)| {
            let agent = (run == 0 && keep_first).then_some(agent);
            (series, agent)
        })
    };
    let outcomes: Vec<_> = if config.parallel {
        (0..config.runs).into_par_iter().map(one).collect()
    } else {
        (0..config.runs).map(one).collect()
    };
    let mut runs = Vec::with_capacity(config.runs);
    let mut first_agent = None;
    for outcome in outcomes {
        let (series, agent) = outcome?;
        if agent.is_some() {
            first_agent = agent;
        }
        runs.push(series);
    }
    let aggregate = AggregateSeries::from_runs(&runs)?;
    if let Some(dir) = &config.output_dir {
        write_outputs(config, dir, &runs, &aggregate, first_agent.as_ref())?;
    }
    Ok(ExperimentResult { runs, aggregate })
}

fn write_outputs(
    config: &ExperimentConfig,
    dir: &Path,
    runs: &[CtrSeries],
    aggregate: &AggregateSeries,
    first_agent: Option<&TrainedAgent>,
) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(config)?;
    super::write_file(&dir.join("config.json"), &json)?;
    write_aggregate(aggregate, &dir.join("aggregate.csv"))?;
    for series in runs {
        write_run(series, &dir.join("runs").join(run_file_name(series.seed)))?;
    }
    if let Some(agent) = first_agent {
        let seed = config.run_seed(0);
        if let (Some(meta), Some(network)) = (agent.checkpoint(config.agent, seed), agent.network()) {
            save_checkpoint(&dir.join("checkpoint"), network, &meta)?;
        }
    }
    Ok(())
}
