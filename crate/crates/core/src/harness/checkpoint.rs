//! Trained-agent files: the network in the model format plus the agent
//! configuration needed to act with it. Replay memory is not saved.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{agent_seed, AgentKind};
use super::series::CtrSeries;
use super::HarnessError;
use crate::agent::dqn::{evaluate_dqn_episode, DqnAgent, DqnConfig};
use crate::agent::pg::{run_pg_episode, PgAgent, PgConfig};
use crate::agent::AgentError;
use crate::env::{EnvConfig, Environment};
use crate::Network;

pub const MODEL_FILE: &str = "model.json";
pub const AGENT_FILE: &str = "agent.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub agent: AgentKind,
    pub num_items: usize,
    /// Seed of the run that produced the model.
    pub seed: u64,
    pub dqn: Option<DqnConfig>,
    pub pg: Option<PgConfig>,
}

impl AgentCheckpoint {
    pub fn dqn(agent: AgentKind, config: DqnConfig, num_items: usize, seed: u64) -> Self {
        Self {
            agent,
            num_items,
            seed,
            dqn: Some(config),
            pg: None,
        }
    }

    pub fn pg(config: PgConfig, num_items: usize, seed: u64) -> Self {
        Self {
            agent: AgentKind::Pg,
            num_items,
            seed,
            dqn: None,
            pg: Some(config),
        }
    }
}

/// Writes `model.json` and `agent.json` into `dir`.
pub fn save_checkpoint(
    dir: &Path,
    network: &Network,
    meta: &AgentCheckpoint,
) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    network.save(&dir.join(MODEL_FILE))?;
    super::write_file(&dir.join(AGENT_FILE), &serde_json::to_string_pretty(meta)?)
}

/// Reads a model file and the `agent.json` beside it.
pub fn load_checkpoint(model: &Path) -> Result<(AgentCheckpoint, Network), HarnessError> {
    let meta_path = model
        .parent()
        .map(|d| d.join(AGENT_FILE))
        .unwrap_or_else(|| PathBuf::from(AGENT_FILE));
    let json = fs::read_to_string(&meta_path).map_err(|source| HarnessError::Io {
        path: meta_path.clone(),
        source,
    })?;
    let meta: AgentCheckpoint = serde_json::from_str(&json)?;
    let network = Network::load(model)?;
    if network.output_dim() != meta.num_items {
        return Err(HarnessError::Config(format!(
            "model has {} outputs but agent.json records {} items",
            network.output_dim(),
            meta.num_items
        )));
    }
    Ok((meta, network))
}

/// Plays `episodes` episodes with a saved agent and no learning. DQN agents
/// act greedily; policy-gradient agents sample from their policy.
pub fn evaluate_checkpoint(
    model: &Path,
    env: EnvConfig,
    episodes: usize,
) -> Result<CtrSeries, HarnessError> {
    let (meta, network) = load_checkpoint(model)?;
    let seed = env.seed;
    let failed = |source: AgentError| HarnessError::Run { seed, source };
    let mut env = Environment::new(env).map_err(|e| failed(e.into()))?;
    let mut values = Vec::with_capacity(episodes);
    match (meta.agent, meta.dqn, meta.pg) {
        (AgentKind::DqnCnn | AgentKind::DqnLstm, Some(config), _) => {
            let mut agent =
                DqnAgent::with_network(config, network, agent_seed(seed)).map_err(failed)?;
            for _ in 0..episodes {
                values.push(evaluate_dqn_episode(&mut agent, &mut env, 0.0).map_err(failed)?.ctr());
            }
        }
        (AgentKind::Pg, _, Some(config)) => {
            let mut agent =
                PgAgent::with_network(config, network, agent_seed(seed)).map_err(failed)?;
            for _ in 0..episodes {
                values.push(run_pg_episode(&mut agent, &mut env, false).map_err(failed)?.ctr());
            }
        }
        (kind, _, _) => {
            return Err(HarnessError::Config(format!(
                "agent.json for {kind} lacks its agent configuration"
            )))
        }
    }
    Ok(CtrSeries::new(seed, values))
}
