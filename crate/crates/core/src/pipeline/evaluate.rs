use std::thread;

use serde::{Deserialize, Serialize};

use super::demos::episode_env;
use super::encoder::{EncodeOptions, Encoder};
use super::policy::{PolicyController, PolicyParams};
use crate::error::{ImrlError, Result};
use crate::simworld::{episode_metrics, rollout, AttemptOutcome, EnvSuite, AFS_WINDOW};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub episodes: usize,
    pub attempts: usize,
    /// Fixed initial fill; drawn per episode when unset.
    pub fill: Option<f64>,
    pub encode: EncodeOptions,
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            episodes: 50,
            attempts: AFS_WINDOW,
            fill: None,
            encode: EncodeOptions::default(),
            seed: 0,
            threads: 0,
        }
    }
}

/// Metrics for one bowl and food pairing, pooled over its episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvMetrics {
    pub bowl: String,
    pub food: String,
    pub sur: f64,
    pub sfr: f64,
    /// Mean per-episode AFS.
    pub afs: f64,
    pub episodes: usize,
    pub seed: u64,
}

/// Unweighted mean SUR, SFR and AFS over environments.
pub fn suite_mean(rows: &[EnvMetrics]) -> Result<(f64, f64, f64)> {
    if rows.is_empty() {
        return Err(ImrlError::Metrics("no environments evaluated".into()));
    }
    let n = rows.len() as f64;
    Ok((
        rows.iter().map(|r| r.sur).sum::<f64>() / n,
        rows.iter().map(|r| r.sfr).sum::<f64>() / n,
        rows.iter().map(|r| r.afs).sum::<f64>() / n,
    ))
}

fn run_episode(
    policy: &PolicyParams,
    encoder: &Encoder,
    suite: &EnvSuite,
    cfg: &EvalConfig,
    env_index: usize,
    episode: usize,
) -> Result<Vec<AttemptOutcome>> {
    let (bowl, food) = &suite.envs[env_index];
    let label = format!("eval/{}/{}", bowl.name, food.name);
    let state = episode_env(bowl, food, cfg.fill, &label, episode as u64, cfg.seed)?;
    let mut controller = PolicyController::new(policy, encoder, cfg.encode)?;
    let (traj, _) = rollout(state, cfg.attempts, |_, obs| controller.act(obs))?;
    Ok(traj.attempts())
}

/// Closed-loop evaluation of the policy on every environment of the suite.
/// Episodes run in parallel; results are reduced in a fixed order.
pub fn evaluate(policy: &PolicyParams, encoder: &Encoder, suite: &EnvSuite, cfg: &EvalConfig) -> Result<Vec<EnvMetrics>> {
    if cfg.episodes == 0 || cfg.attempts == 0 {
        return Err(ImrlError::config("eval_episodes", "need at least one episode and one attempt"));
    }
    let jobs: Vec<(usize, usize)> = (0..suite.envs.len())
        .flat_map(|e| (0..cfg.episodes).map(move |ep| (e, ep)))
        .collect();
    let threads = match cfg.threads {
        0 => thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .min(jobs.len())
    .max(1);
    let mut results: Vec<Option<Result<Vec<AttemptOutcome>>>> = (0..jobs.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let chunk = jobs.len().div_ceil(threads);
        for (slot, job) in results.chunks_mut(chunk).zip(jobs.chunks(chunk)) {
            scope.spawn(move || {
                for (out, &(e, ep)) in slot.iter_mut().zip(job) {
                    *out = Some(run_episode(policy, encoder, suite, cfg, e, ep));
                }
            });
        }
    });
    let mut per_env: Vec<Vec<Vec<AttemptOutcome>>> = vec![Vec::new(); suite.envs.len()];
    for (r, &(e, _)) in results.into_iter().zip(&jobs) {
        per_env[e].push(r.expect("every job ran")?);
    }
    suite
        .envs
        .iter()
        .zip(per_env)
        .map(|((bowl, food), episodes)| {
            let all: Vec<AttemptOutcome> = episodes.iter().flatten().copied().collect();
            let pooled = episode_metrics(&all)?;
            let afs = episodes
                .iter()
                .map(|ep| episode_metrics(ep).map(|m| m.afs))
                .sum::<Result<f64>>()?
                / episodes.len() as f64;
            Ok(EnvMetrics {
                bowl: bowl.name.clone(),
                food: food.name.clone(),
                sur: pooled.sur,
                sfr: pooled.sfr,
                afs,
                episodes: episodes.len(),
                seed: cfg.seed,
            })
        })
        .collect()
}
