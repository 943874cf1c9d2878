//! REINFORCE recommender: an LSTM policy with a softmax head, trained by
//! return-weighted categorical cross-entropy on discounted episode returns.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_catalog, encode_state, AgentError, EpisodeStats, RecEnv};
use crate::env::Phase;
use crate::nn::{cross_entropy_loss, Activation, LayerSpec, OptimizerKind};
use crate::{Gradients, Network, Optimizer, Tensor};

/// Added to the return standard deviation when normalizing.
pub const RETURN_STD_EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PgConfig {
    pub gamma: f64,
    pub history_length: usize,
    pub embedding_dim: usize,
    pub lstm_units: usize,
    pub dense_units: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Standardize returns across each update batch.
    pub normalize_returns: bool,
    pub episodes_per_update: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            history_length: 20,
            embedding_dim: 16,
            lstm_units: 64,
            dense_units: 64,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            normalize_returns: true,
            episodes_per_update: 1,
        }
    }
}

impl PgConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(AgentError::Config("gamma must lie in [0, 1]".into()));
        }
        let dims = [
            self.history_length,
            self.embedding_dim,
            self.lstm_units,
            self.dense_units,
            self.episodes_per_update,
        ];
        if dims.contains(&0) {
            return Err(AgentError::Config(
                "history length, layer sizes and update cadence must be positive".into(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(AgentError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    /// Embedding → LSTM → dense ReLU → dense logits → softmax.
    pub fn policy_network_specs(&self, num_items: usize) -> Vec<LayerSpec> {
        vec![
            LayerSpec::Embedding {
                vocab: num_items,
                dim: self.embedding_dim,
            },
            LayerSpec::Lstm {
                in_dim: self.embedding_dim,
                out_dim: self.lstm_units,
            },
            LayerSpec::dense(self.lstm_units, self.dense_units, Activation::Relu),
            LayerSpec::dense(self.dense_units, num_items, Activation::Identity),
            LayerSpec::Softmax { dim: num_items },
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub state: Tensor,
    pub action: usize,
    pub reward: u8,
    /// Probability of `action` under the policy when it was chosen.
    pub action_probability: f64,
}

/// One episode's bandit decisions and their discounted returns.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    steps: Vec<TrajectoryStep>,
    returns: Vec<f64>,
}

impl Trajectory {
    pub fn new(steps: Vec<TrajectoryStep>, gamma: f64) -> Self {
        let rewards: Vec<f64> = steps.iter().map(|s| f64::from(s.reward)).collect();
        let returns = discounted_returns(&rewards, gamma);
        Self { steps, returns }
    }

    pub fn steps(&self) -> &[TrajectoryStep] {
        &self.steps
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// `G_t = r_t + γ·G_{t+1}` computed backwards from the last step.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, &r) in returns.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    returns
}

/// Categorical draw from `distribution`; zero-mass entries are never returned.
pub fn sample_action<R: Rng>(distribution: &Tensor, rng: &mut R) -> usize {
    let p = distribution.data();
    let u: f64 = rng.random::<f64>() * p.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if pi > 0.0 && u < acc {
            return i;
        }
    }
    p.iter().rposition(|&pi| pi > 0.0).unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateOutcome {
    /// No steps to learn from.
    Skipped,
    Updated { loss: f64 },
}

#[derive(Clone, Debug)]
pub struct PgAgent {
    config: PgConfig,
    num_items: usize,
    network: Network,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    pending: Vec<Trajectory>,
}

impl PgAgent {
    pub fn new(config: PgConfig, num_items: usize, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let network = Network::new(config.policy_network_specs(num_items), seed)?;
        Self::with_network(config, network, seed)
    }

    /// Agent around a caller-built policy network ending in a softmax layer.
    pub fn with_network(config: PgConfig, network: Network, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        if !matches!(network.layers().last().map(|l| &l.spec), Some(LayerSpec::Softmax { .. })) {
            return Err(AgentError::Config("policy network must end in softmax".into()));
        }
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, &network);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(11);
        Ok(Self {
            num_items: network.output_dim(),
            config,
            network,
            optimizer,
            rng,
            pending: Vec::new(),
        })
    }

    pub fn config(&self) -> &PgConfig {
        &self.config
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn encode(&self, history: &[usize]) -> Result<Tensor, AgentError> {
        encode_state(history, self.config.history_length, self.num_items)
    }

    /// Policy distribution over items for an encoded state.
    pub fn action_distribution(&self, state: &Tensor) -> Result<Tensor, AgentError> {
        Ok(self.network.predict(state)?)
    }

    /// Per-step weights: raw returns, or returns standardized across all steps.
    pub fn step_weights(&self, trajectories: &[Trajectory]) -> Vec<f64> {
        let returns: Vec<f64> = trajectories
            .iter()
            .flat_map(|t| t.returns().iter().copied())
            .collect();
        if !self.config.normalize_returns || returns.is_empty() {
            return returns;
        }
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let std = (returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
        returns
            .iter()
            .map(|g| (g - mean) / (std + RETURN_STD_EPSILON))
            .collect()
    }

    /// Objective `Σ_t −w_t·log π(a_t | s_t)` and its parameter gradient.
    pub fn objective_gradients(
        &mut self,
        trajectories: &[Trajectory],
    ) -> Result<(f64, Gradients), AgentError> {
        let weights = self.step_weights(trajectories);
        let mut grads = Gradients::zeros_like(&self.network);
        let mut total = 0.0;
        let steps = trajectories.iter().flat_map(Trajectory::steps);
        for (step, &w) in steps.zip(&weights) {
            if w == 0.0 {
                continue;
            }
            let probs = self.network.forward(&step.state)?;
            let ce = cross_entropy_loss(&probs, step.action, w)?;
            total += ce.loss;
            self.network
                .accumulate_backward_from_logits(&ce.logit_grad, &mut grads)?;
        }
        Ok((total, grads))
    }

    /// One optimizer step on the REINFORCE objective over `trajectories`.
    pub fn policy_update(&mut self, trajectories: &[Trajectory]) -> Result<UpdateOutcome, AgentError> {
        if trajectories.iter().all(Trajectory::is_empty) {
            return Ok(UpdateOutcome::Skipped);
        }
        let (loss, grads) = self.objective_gradients(trajectories)?;
        self.optimizer.step(&mut self.network, &grads)?;
        Ok(UpdateOutcome::Updated { loss })
    }
}

/// Plays one episode sampling from the policy at every bandit step. With
/// `train`, the trajectory is queued and an update runs every
/// `episodes_per_update` episodes.
pub fn run_pg_episode<E: RecEnv>(
    agent: &mut PgAgent,
    env: &mut E,
    train: bool,
) -> Result<EpisodeStats, AgentError> {
    check_catalog(agent.num_items, env)?;
    let mut stats = EpisodeStats::default();
    let mut steps = Vec::new();
    let mut r = env.reset();
    while r.phase != Phase::Terminal {
        r = match r.phase {
            Phase::Organic => env.step(None)?,
            _ => {
                let state = agent.encode(&r.observation)?;
                let dist = agent.action_distribution(&state)?;
                let action = sample_action(&dist, &mut agent.rng);
                let s = env.step(Some(action))?;
                stats.record(s.reward);
                steps.push(TrajectoryStep {
                    state,
                    action,
                    reward: s.reward,
                    action_probability: dist[action],
                });
                s
            }
        };
    }
    if train {
        agent
            .pending
            .push(Trajectory::new(steps, agent.config.gamma));
        if agent.pending.len() >= agent.config.episodes_per_update {
            let batch = std::mem::take(&mut agent.pending);
            agent.policy_update(&batch)?;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests;
