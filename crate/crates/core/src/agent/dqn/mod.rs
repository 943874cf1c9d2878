//! Deep Q-learning with experience replay and ε-greedy exploration.

mod replay;
mod schedule;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_catalog, encode_state, AgentError, EpisodeStats, RecEnv};
use crate::env::Phase;
use crate::nn::{huber_loss, mse_loss, Activation, LayerSpec, OptimizerKind};
use crate::{Gradients, Network, Optimizer, Tensor};

pub use replay::{ReplayMemory, Transition};
pub use schedule::epsilon_at;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueNet {
    Conv1d,
    Lstm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    Huber,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// Restart the anneal at every episode.
    PerEpisode,
    /// Anneal once over the agent's lifetime of bandit steps.
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub value_net: ValueNet,
    pub loss: LossKind,
    pub huber_delta: f64,
    pub gamma: f64,
    pub replay_capacity: usize,
    pub minibatch_size: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Bandit steps over which ε falls from `eps_start` to `eps_end`.
    pub epsilon_horizon: f64,
    pub epsilon_schedule: EpsilonSchedule,
    pub history_length: usize,
    pub embedding_dim: usize,
    pub hidden_units: usize,
    /// Convolution width of the Conv1d value network.
    pub kernel_width: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub use_target_network: bool,
    /// Training steps between target-network refreshes.
    pub target_sync_interval: u64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            value_net: ValueNet::Lstm,
            loss: LossKind::Huber,
            huber_delta: 2.0,
            gamma: 0.99,
            replay_capacity: 10_000,
            minibatch_size: 32,
            eps_start: 0.9,
            eps_end: 0.1,
            epsilon_horizon: 50.0,
            epsilon_schedule: EpsilonSchedule::PerEpisode,
            history_length: 20,
            embedding_dim: 16,
            hidden_units: 64,
            kernel_width: 3,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            use_target_network: false,
            target_sync_interval: 1_000,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |msg: &str| Err(AgentError::Config(msg.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if !(0.0 <= self.eps_end && self.eps_end <= self.eps_start && self.eps_start <= 1.0) {
            return fail("need 0 <= eps_end <= eps_start <= 1");
        }
        if self.replay_capacity == 0 || self.minibatch_size == 0 {
            return fail("replay capacity and minibatch size must be positive");
        }
        if self.minibatch_size > self.replay_capacity {
            return fail("minibatch size exceeds replay capacity");
        }
        if self.history_length == 0 || self.embedding_dim == 0 || self.hidden_units == 0 {
            return fail("history length and layer sizes must be positive");
        }
        if self.value_net == ValueNet::Conv1d
            && (self.kernel_width == 0 || self.kernel_width > self.history_length)
        {
            return fail("kernel width must lie in 1..=history_length");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return fail("learning rate must be positive");
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return fail("huber delta must be positive");
        }
        if self.use_target_network && self.target_sync_interval == 0 {
            return fail("target sync interval must be positive");
        }
        Ok(())
    }

    /// Embedding → (Conv1d + max-pool | LSTM) → dense ReLU → one Q-value per item.
    pub fn value_network_specs(&self, num_items: usize) -> Vec<LayerSpec> {
        let (e, h) = (self.embedding_dim, self.hidden_units);
        let body = match self.value_net {
            ValueNet::Conv1d => LayerSpec::Conv1d {
                in_dim: e,
                out_dim: h,
                kernel_width: self.kernel_width,
            },
            ValueNet::Lstm => LayerSpec::Lstm { in_dim: e, out_dim: h },
        };
        vec![
            LayerSpec::Embedding {
                vocab: num_items,
                dim: e,
            },
            body,
            LayerSpec::dense(h, h, Activation::Relu),
            LayerSpec::dense(h, num_items, Activation::Identity),
        ]
    }

    pub fn epsilon(&self, step: usize) -> f64 {
        epsilon_at(step, self.epsilon_horizon, self.eps_start, self.eps_end)
    }
}

/// ε-greedy choice over the network's Q-values; greedy ties go to the lowest index.
pub fn select_action<R: Rng>(
    q_network: &Network,
    state: &Tensor,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize, AgentError> {
    let n = q_network.output_dim();
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..n));
    }
    let q = q_network.predict(state)?;
    Ok(q.argmax().expect("value network has at least one output"))
}

/// Bootstrapped targets `r` (terminal) or `r + γ·max_a' Q(s', a')`.
pub fn compute_targets(
    minibatch: &[&Transition],
    network: &Network,
    gamma: f64,
) -> Result<Vec<f64>, AgentError> {
    minibatch
        .iter()
        .map(|t| {
            let r = f64::from(t.reward);
            if t.terminal || gamma == 0.0 {
                Ok(r)
            } else {
                let q = network.predict(&t.next_state)?;
                Ok(r + gamma * q.max().expect("non-empty Q vector"))
            }
        })
        .collect()
}

/// Loss on the taken action's Q-value and the output gradient, zero on every
/// other action. `batch` scales both to a minibatch mean.
pub fn masked_output_gradient(
    q_values: &Tensor,
    action: usize,
    target: f64,
    loss: LossKind,
    huber_delta: f64,
    batch: usize,
) -> Result<(f64, Tensor), AgentError> {
    let pred = Tensor::from_vec(vec![q_values[action]]);
    let target = Tensor::from_vec(vec![target]);
    let (l, g) = match loss {
        LossKind::Mse => mse_loss(&pred, &target)?,
        LossKind::Huber => huber_loss(&pred, &target, huber_delta)?,
    };
    let scale = 1.0 / batch as f64;
    let mut grad = Tensor::zeros(q_values.shape());
    grad[action] = g[0] * scale;
    Ok((l * scale, grad))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrainOutcome {
    /// Replay holds fewer transitions than one minibatch.
    Skipped,
    Trained { loss: f64 },
}

#[derive(Clone, Debug)]
pub struct DqnAgent {
    config: DqnConfig,
    num_items: usize,
    network: Network,
    target: Option<Network>,
    optimizer: Optimizer,
    replay: ReplayMemory,
    rng: ChaCha8Rng,
    grads: Gradients,
    train_steps: u64,
    lifetime_bandit_steps: usize,
}

impl DqnAgent {
    /// Agent over a catalog of `num_items` with the configured value network.
    pub fn new(config: DqnConfig, num_items: usize, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let network = Network::new(config.value_network_specs(num_items), seed)?;
        Self::with_network(config, network, seed)
    }

    /// Agent around a caller-built value network whose output has one unit per action.
    pub fn with_network(config: DqnConfig, network: Network, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let num_items = network.output_dim();
        let optimizer = Optimizer::new(config.optimizer, config.learning_rate, &network);
        let target = config.use_target_network.then(|| network.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(7);
        Ok(Self {
            grads: Gradients::zeros_like(&network),
            replay: ReplayMemory::new(config.replay_capacity),
            config,
            num_items,
            network,
            target,
            optimizer,
            rng,
            train_steps: 0,
            lifetime_bandit_steps: 0,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn replay(&self) -> &ReplayMemory {
        &self.replay
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn encode(&self, history: &[usize]) -> Result<Tensor, AgentError> {
        encode_state(history, self.config.history_length, self.num_items)
    }

    pub fn q_values(&self, state: &Tensor) -> Result<Tensor, AgentError> {
        Ok(self.network.predict(state)?)
    }

    pub fn act(&mut self, state: &Tensor, epsilon: f64) -> Result<usize, AgentError> {
        select_action(&self.network, state, epsilon, &mut self.rng)
    }

    pub fn remember(&mut self, transition: Transition) {
        self.replay.push(transition);
    }

    /// One minibatch gradient step on the replay memory.
    pub fn train_step(&mut self) -> Result<TrainOutcome, AgentError> {
        let batch = self.config.minibatch_size;
        if self.replay.len() < batch {
            return Ok(TrainOutcome::Skipped);
        }
        let minibatch = self.replay.sample(batch, &mut self.rng);
        let bootstrap = self.target.as_ref().unwrap_or(&self.network);
        let targets = compute_targets(&minibatch, bootstrap, self.config.gamma)?;
        self.grads.zero();
        let mut total = 0.0;
        for (t, &y) in minibatch.iter().zip(&targets) {
            let q = self.network.forward(&t.state)?;
            let (loss, grad) = masked_output_gradient(
                &q,
                t.action,
                y,
                self.config.loss,
                self.config.huber_delta,
                batch,
            )?;
            total += loss;
            self.network.accumulate_backward(&grad, &mut self.grads)?;
        }
        self.optimizer.step(&mut self.network, &self.grads)?;
        self.train_steps += 1;
        if let Some(target) = self.target.as_mut() {
            if self.train_steps.is_multiple_of(self.config.target_sync_interval) {
                target.clone_from(&self.network);
            }
        }
        Ok(TrainOutcome::Trained { loss: total })
    }

    fn exploration(&self, episode_step: usize) -> f64 {
        match self.config.epsilon_schedule {
            EpsilonSchedule::PerEpisode => self.config.epsilon(episode_step),
            EpsilonSchedule::Global => self.config.epsilon(self.lifetime_bandit_steps),
        }
    }
}

/// Plays one training episode: ε-greedy decisions at every bandit step, one
/// stored transition and one training step per decision.
///
/// A transition's next state is the encoded history at the following bandit
/// decision, or at termination (then marked terminal).
pub fn run_dqn_episode<E: RecEnv>(
    agent: &mut DqnAgent,
    env: &mut E,
) -> Result<EpisodeStats, AgentError> {
    check_catalog(agent.num_items, env)?;
    let mut stats = EpisodeStats::default();
    let mut pending: Option<(Tensor, usize, u8)> = None;
    let mut r = env.reset();
    loop {
        match r.phase {
            Phase::Terminal => {
                if let Some((state, action, reward)) = pending.take() {
                    let next_state = agent.encode(&r.observation)?;
                    agent.remember(Transition {
                        state,
                        action,
                        reward,
                        next_state,
                        terminal: true,
                    });
                    agent.train_step()?;
                }
                return Ok(stats);
            }
            Phase::Organic => r = env.step(None)?,
            Phase::Bandit => {
                let state = agent.encode(&r.observation)?;
                if let Some((prev, action, reward)) = pending.take() {
                    agent.remember(Transition {
                        state: prev,
                        action,
                        reward,
                        next_state: state.clone(),
                        terminal: false,
                    });
                    agent.train_step()?;
                }
                let epsilon = agent.exploration(stats.bandit_steps);
                let action = agent.act(&state, epsilon)?;
                r = env.step(Some(action))?;
                stats.record(r.reward);
                agent.lifetime_bandit_steps += 1;
                pending = Some((state, action, r.reward));
            }
        }
    }
}

/// Plays one episode with a fixed ε and no learning.
pub fn evaluate_dqn_episode<E: RecEnv>(
    agent: &mut DqnAgent,
    env: &mut E,
    epsilon: f64,
) -> Result<EpisodeStats, AgentError> {
    check_catalog(agent.num_items, env)?;
    let mut stats = EpisodeStats::default();
    let mut r = env.reset();
    loop {
        r = match r.phase {
            Phase::Terminal => return Ok(stats),
            Phase::Organic => env.step(None)?,
            Phase::Bandit => {
                let state = agent.encode(&r.observation)?;
                let action = agent.act(&state, epsilon)?;
                let s = env.step(Some(action))?;
                stats.record(s.reward);
                s
            }
        };
    }
}
