use serde::{Deserialize, Serialize};

use super::EnvError;

/// Simulator parameters. Probabilities must lie strictly inside (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_features: usize,
    /// Chance an organic view is followed by another organic view.
    pub organic_continue_prob: f64,
    /// Chance a bandit step without a click is followed by another bandit step.
    pub bandit_continue_prob: f64,
    /// Chance the user leaves when a bandit session ends without a click.
    pub leave_prob: f64,
    pub max_steps_per_episode: usize,
    /// Click-through rate of a uniformly random recommender after calibration.
    pub target_random_ctr: f64,
    /// Sharpness of the click logistic in the user/item affinity.
    pub click_scale: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            num_users: 100,
            num_items: 100,
            num_features: 10,
            organic_continue_prob: 0.8,
            bandit_continue_prob: 0.8,
            leave_prob: 0.1,
            max_steps_per_episode: 500,
            target_random_ctr: 0.01,
            click_scale: 6.0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn with_size(num_users: usize, num_items: usize, seed: u64) -> Self {
        Self {
            num_users,
            num_items,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("num_users", self.num_users),
            ("num_items", self.num_items),
            ("num_features", self.num_features),
            ("max_steps_per_episode", self.max_steps_per_episode),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(EnvError::config(field, "must be at least 1"));
            }
        }
        let probabilities = [
            ("organic_continue_prob", self.organic_continue_prob),
            ("bandit_continue_prob", self.bandit_continue_prob),
            ("leave_prob", self.leave_prob),
        ];
        for (field, p) in probabilities {
            if !(p > 0.0 && p < 1.0) {
                return Err(EnvError::config(field, "must lie strictly between 0 and 1"));
            }
        }
        if !(self.target_random_ctr > 0.0 && self.target_random_ctr <= 0.5) {
            return Err(EnvError::config("target_random_ctr", "must lie in (0, 0.5]"));
        }
        if !(self.click_scale.is_finite() && self.click_scale > 0.0) {
            return Err(EnvError::config("click_scale", "must be positive and finite"));
        }
        Ok(())
    }

    /// Expected number of bandit decisions per episode, ignoring clicks and the step cap.
    pub fn expected_bandit_steps(&self) -> f64 {
        1.0 / ((1.0 - self.bandit_continue_prob) * self.leave_prob)
    }
}
