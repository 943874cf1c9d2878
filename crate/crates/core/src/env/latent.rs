use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::nn::sigmoid;

use super::EnvError;

/// Minimum number of (user, item) pairs averaged when calibrating the click offset.
pub const CALIBRATION_PAIRS: usize = 100_000;
pub const CALIBRATION_BRACKET: (f64, f64) = (-20.0, 20.0);
pub const CALIBRATION_MAX_ITERS: usize = 100;

/// Latent user and item vectors plus the click logistic parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentModel {
    pub num_users: usize,
    pub num_items: usize,
    pub num_features: usize,
    /// `num_users × num_features`, row-major.
    pub user_vectors: Vec<f64>,
    /// `num_items × num_features`, row-major.
    pub item_vectors: Vec<f64>,
    pub click_scale: f64,
    pub click_offset: f64,
}

impl LatentModel {
    /// Draws i.i.d. standard normal entries scaled by `1/√num_features`.
    pub fn sample<R: Rng>(
        num_users: usize,
        num_items: usize,
        num_features: usize,
        click_scale: f64,
        rng: &mut R,
    ) -> Self {
        let scale = 1.0 / (num_features as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    z * scale
                })
                .collect()
        };
        let user_vectors = draw(num_users * num_features);
        let item_vectors = draw(num_items * num_features);
        Self {
            num_users,
            num_items,
            num_features,
            user_vectors,
            item_vectors,
            click_scale,
            click_offset: 0.0,
        }
    }

    pub fn user(&self, user: usize) -> &[f64] {
        &self.user_vectors[user * self.num_features..(user + 1) * self.num_features]
    }

    pub fn item(&self, item: usize) -> &[f64] {
        &self.item_vectors[item * self.num_features..(item + 1) * self.num_features]
    }

    /// Affinity `β_item · ω_user`.
    pub fn affinity(&self, user: usize, item: usize) -> f64 {
        self.item(item)
            .iter()
            .zip(self.user(user))
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `σ(click_scale · affinity − click_offset)`.
    pub fn click_probability(&self, user: usize, item: usize) -> f64 {
        sigmoid(self.click_scale * self.affinity(user, item) - self.click_offset)
    }

    pub(crate) fn check_dims(&self) -> Result<(), EnvError> {
        let users_ok = self.user_vectors.len() == self.num_users * self.num_features;
        let items_ok = self.item_vectors.len() == self.num_items * self.num_features;
        if !users_ok || !items_ok {
            return Err(EnvError::config("latent", "matrix sizes do not match dimensions"));
        }
        if !self.click_offset.is_finite() || !self.click_scale.is_finite() {
            return Err(EnvError::config("latent", "click parameters must be finite"));
        }
        Ok(())
    }
}

/// Finds the offset `b` for which the mean click probability over uniformly
/// random (user, item) pairs equals `target_random_ctr`, by bisection on
/// [-20, 20].
///
/// When the population has at most [`CALIBRATION_PAIRS`] pairs every pair is
/// used; otherwise that many pairs are drawn from `rng`.
pub fn calibrate_offset<R: Rng>(
    latent: &LatentModel,
    click_scale: f64,
    target_random_ctr: f64,
    rng: &mut R,
) -> Result<f64, EnvError> {
    if !(target_random_ctr > 0.0 && target_random_ctr <= 0.5) {
        return Err(EnvError::Calibration(format!(
            "target click rate {target_random_ctr} outside (0, 0.5]"
        )));
    }
    let population = latent.num_users * latent.num_items;
    let logits: Vec<f64> = if population <= CALIBRATION_PAIRS {
        (0..latent.num_users)
            .flat_map(|u| (0..latent.num_items).map(move |i| (u, i)))
            .map(|(u, i)| click_scale * latent.affinity(u, i))
            .collect()
    } else {
        (0..CALIBRATION_PAIRS)
            .map(|_| {
                let u = rng.random_range(0..latent.num_users);
                let i = rng.random_range(0..latent.num_items);
                click_scale * latent.affinity(u, i)
            })
            .collect()
    };
    let mean_ctr = |offset: f64| -> f64 {
        logits.iter().map(|&z| sigmoid(z - offset)).sum::<f64>() / logits.len() as f64
    };
    let (mut lo, mut hi) = CALIBRATION_BRACKET;
    if !(mean_ctr(lo) >= target_random_ctr && mean_ctr(hi) <= target_random_ctr) {
        return Err(EnvError::Calibration(format!(
            "target click rate {target_random_ctr} not bracketed by offsets [{lo}, {hi}]"
        )));
    }
    for _ in 0..CALIBRATION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let ctr = mean_ctr(mid);
        if (ctr - target_random_ctr).abs() <= 1e-9 * target_random_ctr || hi - lo <= 1e-13 {
            return Ok(mid);
        }
        if ctr > target_random_ctr {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(EnvError::Calibration(format!(
        "bisection did not converge in {CALIBRATION_MAX_ITERS} iterations"
    )))
}
