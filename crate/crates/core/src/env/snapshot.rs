use serde::{Deserialize, Serialize};

use super::{EnvConfig, EnvError, LatentModel};

pub const SNAPSHOT_VERSION: u32 = 1;

/// JSON form of an environment: configuration plus the sampled latent model.
/// Matrices are flat row-major arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub version: u32,
    pub config: EnvConfig,
    pub user_vectors: Vec<f64>,
    pub item_vectors: Vec<f64>,
    pub click_scale: f64,
    pub click_offset: f64,
}

impl EnvSnapshot {
    pub(crate) fn capture(config: &EnvConfig, latent: &LatentModel) -> Self {
        Self {
            version: SNAPSHOT_VERSION,
            config: config.clone(),
            user_vectors: latent.user_vectors.clone(),
            item_vectors: latent.item_vectors.clone(),
            click_scale: latent.click_scale,
            click_offset: latent.click_offset,
        }
    }

    pub(crate) fn into_parts(self) -> Result<(EnvConfig, LatentModel), EnvError> {
        if self.version != SNAPSHOT_VERSION {
            return Err(EnvError::config("version", "unsupported snapshot version"));
        }
        let latent = LatentModel {
            num_users: self.config.num_users,
            num_items: self.config.num_items,
            num_features: self.config.num_features,
            user_vectors: self.user_vectors,
            item_vectors: self.item_vectors,
            click_scale: self.click_scale,
            click_offset: self.click_offset,
        };
        Ok((self.config, latent))
    }

    pub fn to_json(&self) -> Result<String, EnvError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self, EnvError> {
        Ok(serde_json::from_str(json)?)
    }
}
