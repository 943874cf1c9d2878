use rand::Rng;

use super::{AgentError, EpisodeStats, RecEnv};
use crate::env::Phase;

/// Uniformly random recommender; the reference baseline.
pub fn run_random_episode<E: RecEnv, R: Rng>(
    env: &mut E,
    rng: &mut R,
) -> Result<EpisodeStats, AgentError> {
    let mut stats = EpisodeStats::default();
    let mut r = env.reset();
    loop {
        r = match r.phase {
            Phase::Terminal => return Ok(stats),
            Phase::Organic => env.step(None)?,
            Phase::Bandit => {
                let s = env.step(Some(rng.random_range(0..env.num_items())))?;
                stats.record(s.reward);
                s
            }
        };
    }
}
