//! Seeded organic/bandit user simulator.
//!
//! A user first browses organically, building a view history. A bandit
//! session then offers the recommender one decision per step. A click sends
//! the user back to organic browsing; a bandit session that ends without a
//! click either returns to organic browsing or ends the episode.

mod config;
mod latent;
mod snapshot;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::EnvConfig;
pub use latent::{calibrate_offset, LatentModel, CALIBRATION_PAIRS};
pub use snapshot::{EnvSnapshot, SNAPSHOT_VERSION};

const SESSION_STREAM: u64 = 1;
const CALIBRATION_STREAM: u64 = 2;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("protocol violation: {0}")]
    Protocol(&'static str),
    #[error("action {action} out of range for {num_items} items")]
    InvalidAction { action: usize, num_items: usize },
    #[error("user {user} out of range for {num_users} users")]
    InvalidUser { user: usize, num_users: usize },
    #[error("click offset calibration failed: {0}")]
    Calibration(String),
    #[error("environment snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
}

impl EnvError {
    pub(crate) fn config(field: &'static str, reason: &str) -> Self {
        EnvError::Config {
            field,
            reason: reason.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Organic,
    Bandit,
    Terminal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionState {
    pub user_id: usize,
    pub phase: Phase,
    pub step_count: usize,
    /// Organically viewed items, oldest first.
    pub history: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub observation: Vec<usize>,
    pub reward: u8,
    pub done: bool,
    /// Phase the next call to `step` will act in.
    pub phase: Phase,
}

pub struct Environment {
    config: EnvConfig,
    latent: LatentModel,
    rng: ChaCha8Rng,
    session: Option<SessionState>,
}

impl Environment {
    /// Samples the latent model from `config.seed` and calibrates the click offset.
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut latent = LatentModel::sample(
            config.num_users,
            config.num_items,
            config.num_features,
            config.click_scale,
            &mut rng,
        );
        rng.set_stream(CALIBRATION_STREAM);
        latent.click_offset =
            calibrate_offset(&latent, config.click_scale, config.target_random_ctr, &mut rng)?;
        Self::from_latent(config, latent)
    }

    /// Uses a given latent model as is (no sampling, no calibration).
    pub fn from_latent(config: EnvConfig, latent: LatentModel) -> Result<Self, EnvError> {
        config.validate()?;
        latent.check_dims()?;
        if (latent.num_users, latent.num_items, latent.num_features)
            != (config.num_users, config.num_items, config.num_features)
        {
            return Err(EnvError::config("latent", "dimensions differ from the configuration"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SESSION_STREAM);
        Ok(Self {
            config,
            latent,
            rng,
            session: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn latent(&self) -> &LatentModel {
        &self.latent
    }

    pub fn session(&self) -> Option<&SessionState> {
        self.session.as_ref()
    }

    pub fn num_items(&self) -> usize {
        self.config.num_items
    }

    /// Starts an episode for a uniformly drawn user, who has already viewed one item.
    pub fn reset(&mut self) -> StepResult {
        let user_id = self.rng.random_range(0..self.config.num_users);
        let first = self.draw_organic_item(user_id);
        let session = SessionState {
            user_id,
            phase: Phase::Organic,
            step_count: 0,
            history: vec![first],
        };
        let result = StepResult {
            observation: session.history.clone(),
            reward: 0,
            done: false,
            phase: Phase::Organic,
        };
        self.session = Some(session);
        result
    }

    /// Advances one step. `action` must be `Some(item)` in the bandit phase and
    /// `None` in the organic phase.
    pub fn step(&mut self, action: Option<usize>) -> Result<StepResult, EnvError> {
        let session = self
            .session
            .as_ref()
            .ok_or(EnvError::Protocol("step called before reset"))?;
        let (user, phase) = (session.user_id, session.phase);
        let mut reward = 0;
        let next = match (phase, action) {
            (Phase::Terminal, _) => return Err(EnvError::Protocol("episode already terminated")),
            (Phase::Organic, Some(_)) => {
                return Err(EnvError::Protocol("action supplied during organic phase"))
            }
            (Phase::Bandit, None) => {
                return Err(EnvError::Protocol("bandit phase requires an action"))
            }
            (Phase::Organic, None) => {
                let item = self.draw_organic_item(user);
                self.session_mut().history.push(item);
                if self.rng.random::<f64>() < self.config.organic_continue_prob {
                    Phase::Organic
                } else {
                    Phase::Bandit
                }
            }
            (Phase::Bandit, Some(item)) => {
                if item >= self.config.num_items {
                    return Err(EnvError::InvalidAction {
                        action: item,
                        num_items: self.config.num_items,
                    });
                }
                let p = self.latent.click_probability(user, item);
                if self.rng.random::<f64>() < p {
                    reward = 1;
                    Phase::Organic
                } else if self.rng.random::<f64>() < self.config.bandit_continue_prob {
                    Phase::Bandit
                } else if self.rng.random::<f64>() < self.config.leave_prob {
                    Phase::Terminal
                } else {
                    Phase::Organic
                }
            }
        };
        let max_steps = self.config.max_steps_per_episode;
        let session = self.session_mut();
        session.step_count += 1;
        session.phase = if session.step_count >= max_steps {
            Phase::Terminal
        } else {
            next
        };
        Ok(StepResult {
            observation: session.history.clone(),
            reward,
            done: session.phase == Phase::Terminal,
            phase: session.phase,
        })
    }

    fn session_mut(&mut self) -> &mut SessionState {
        self.session.as_mut().expect("session exists after reset")
    }

    fn check_user(&self, user: usize) -> Result<(), EnvError> {
        if user >= self.config.num_users {
            return Err(EnvError::InvalidUser {
                user,
                num_users: self.config.num_users,
            });
        }
        Ok(())
    }

    /// Organic view distribution `softmax(β · ω_user)` over all items.
    pub fn organic_distribution(&self, user: usize) -> Result<Vec<f64>, EnvError> {
        self.check_user(user)?;
        let logits: Vec<f64> = (0..self.config.num_items)
            .map(|i| self.latent.affinity(user, i))
            .collect();
        Ok(crate::nn::softmax(&logits))
    }

    /// Draws one organically viewed item for `user` from the environment RNG.
    pub fn sample_organic_item(&mut self, user: usize) -> Result<usize, EnvError> {
        self.check_user(user)?;
        Ok(self.draw_organic_item(user))
    }

    fn draw_organic_item(&mut self, user: usize) -> usize {
        let probs = self
            .organic_distribution(user)
            .expect("user index validated by caller");
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave the cumulative sum just below u.
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn click_probability(&self, user: usize, item: usize) -> Result<f64, EnvError> {
        self.check_user(user)?;
        if item >= self.config.num_items {
            return Err(EnvError::InvalidAction {
                action: item,
                num_items: self.config.num_items,
            });
        }
        Ok(self.latent.click_probability(user, item))
    }

    /// Best single item for `user` and its click probability; ties go to the lowest index.
    pub fn oracle_best_action(&self, user: usize) -> Result<(usize, f64), EnvError> {
        self.check_user(user)?;
        let mut best = (0, self.latent.click_probability(user, 0));
        for item in 1..self.config.num_items {
            let p = self.latent.click_probability(user, item);
            if p > best.1 {
                best = (item, p);
            }
        }
        Ok(best)
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot::capture(&self.config, &self.latent)
    }

    /// Rebuilds an environment from a snapshot; its RNG restarts from the configured seed.
    pub fn from_snapshot(snapshot: EnvSnapshot) -> Result<Self, EnvError> {
        let (config, latent) = snapshot.into_parts()?;
        Self::from_latent(config, latent)
    }
}
