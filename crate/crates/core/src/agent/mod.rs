//! Recommender agents acting in the bandit phase of the simulator.

pub mod dqn;
pub mod pg;
mod random;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvError, Environment, StepResult};
use crate::nn::NnError;
use crate::Tensor;

pub use random::run_random_episode;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("observed item {item} outside catalog of {num_items}")]
    InvalidObservation { item: usize, num_items: usize },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("agent and environment disagree on catalog size ({agent} vs {env})")]
    CatalogMismatch { agent: usize, env: usize },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Gym-style interface the episode runners drive.
pub trait RecEnv {
    fn num_items(&self) -> usize;
    fn reset(&mut self) -> StepResult;
    fn step(&mut self, action: Option<usize>) -> Result<StepResult, EnvError>;
}

impl RecEnv for Environment {
    fn num_items(&self) -> usize {
        Environment::num_items(self)
    }

    fn reset(&mut self) -> StepResult {
        Environment::reset(self)
    }

    fn step(&mut self, action: Option<usize>) -> Result<StepResult, EnvError> {
        Environment::step(self, action)
    }
}

/// Per-episode counts of recommendation opportunities and clicks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub bandit_steps: usize,
    pub clicks: usize,
}

impl EpisodeStats {
    pub(crate) fn record(&mut self, reward: u8) {
        self.bandit_steps += 1;
        self.clicks += usize::from(reward);
    }

    /// Click-through rate; zero for an episode without bandit steps.
    pub fn ctr(&self) -> f64 {
        if self.bandit_steps == 0 {
            0.0
        } else {
            self.clicks as f64 / self.bandit_steps as f64
        }
    }
}

/// Token id used for left padding; the embedding maps it to a zero row.
pub fn null_token(num_items: usize) -> usize {
    num_items
}

/// Encodes the last `history_length` viewed items as a token tensor of shape
/// `[history_length]`, left-padded with the null token.
pub fn encode_state(
    history: &[usize],
    history_length: usize,
    num_items: usize,
) -> Result<Tensor, AgentError> {
    let kept = &history[history.len().saturating_sub(history_length)..];
    let mut tokens = vec![null_token(num_items) as f64; history_length - kept.len()];
    for &item in kept {
        if item >= num_items {
            return Err(AgentError::InvalidObservation { item, num_items });
        }
        tokens.push(item as f64);
    }
    Ok(Tensor::from_vec(tokens))
}

pub(crate) fn check_catalog<E: RecEnv>(agent_items: usize, env: &E) -> Result<(), AgentError> {
    if agent_items != env.num_items() {
        return Err(AgentError::CatalogMismatch {
            agent: agent_items,
            env: env.num_items(),
        });
    }
    Ok(())
}
