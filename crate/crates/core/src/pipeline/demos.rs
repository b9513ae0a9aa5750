use rand::Rng as _;

use crate::error::{ImrlError, Result};
use crate::seed;
use crate::simworld::{make_env, rollout_expert, BowlSpec, EnvSuite, FoodSpec, SimState, Trajectory};

/// Initial fill levels are drawn from this range unless fixed.
pub const FILL_RANGE: (f64, f64) = (0.6, 1.0);

/// Environment for episode `index` of a run labelled `label`.
pub fn episode_env(
    bowl: &BowlSpec,
    food: &FoodSpec,
    fill: Option<f64>,
    label: &str,
    index: u64,
    root: u64,
) -> Result<SimState> {
    let mut rng = seed::rng(seed::derive_indexed(root, label, index));
    let fill = fill.unwrap_or_else(|| rng.random_range(FILL_RANGE.0..=FILL_RANGE.1));
    make_env(bowl.clone(), food.clone(), fill, rng.random())
}

/// Expert demonstrations: episode `i` uses environment `i mod |suite|`.
pub fn gen_demos(n: usize, suite: &EnvSuite, attempts: usize, fill: Option<f64>, seed: u64) -> Result<Vec<Trajectory>> {
    if n == 0 || attempts == 0 {
        return Err(ImrlError::config("demos", "need at least one demo with at least one attempt"));
    }
    if suite.envs.is_empty() {
        return Err(ImrlError::config("suite", "suite has no environments"));
    }
    (0..n)
        .map(|i| {
            let (bowl, food) = &suite.envs[i % suite.envs.len()];
            let env = episode_env(bowl, food, fill, "demo", i as u64, seed)?;
            Ok(rollout_expert(env, attempts)?.0)
        })
        .collect()
}
