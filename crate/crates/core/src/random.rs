//! Uniform random-action baseline.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ActionSpace1, ActionSpace2, ActionSpaceKind, EnvState, TransponderEnv};
use crate::error::{config_err, Result};
use crate::harness::mean_std;
use crate::profile::Profile;
use crate::trace::{config_hash, RunTrace, TraceMeta};

/// Stream of the action generator; the environment owns stream 0.
const ACTION_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub space: ActionSpaceKind,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RandomResult {
    /// Reward at the last step of each episode.
    pub final_rewards: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `final_rewards`.
    pub std: f64,
    /// One point per episode at the cumulative step count.
    pub trace: RunTrace,
}

/// Draws one uniformly random action for `space`.
pub fn random_action<R: rand::Rng + ?Sized>(space: ActionSpaceKind, rng: &mut R) -> Action {
    match space {
        ActionSpaceKind::Space1 => Action::Full(ActionSpace1::sample(rng)),
        ActionSpaceKind::Space2 => Action::Edit(ActionSpace2::sample(rng)),
    }
}

/// Plays `episodes` full episodes with uniformly random actions.
pub fn run_random(profile: Arc<Profile>, params: &RandomParams) -> Result<RandomResult> {
    run_random_observed(profile, params, |_, _, _| {})
}

/// [`run_random`], calling `observe(step, final_reward, final_state)` at
/// every episode end.
pub fn run_random_observed(
    profile: Arc<Profile>,
    params: &RandomParams,
    mut observe: impl FnMut(u64, f64, &EnvState),
) -> Result<RandomResult> {
    if params.episodes == 0 {
        return Err(config_err("random baseline needs at least one episode"));
    }
    let mut env = TransponderEnv::new(profile, params.space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(ACTION_STREAM);
    let meta = TraceMeta { optimizer: "random".into(), seed: params.seed, config_hash: config_hash(params) };
    let mut trace = RunTrace::new(meta, &[]);
    let mut final_rewards = Vec::with_capacity(params.episodes);
    let mut steps = 0u64;

    env.reset(Some(params.seed));
    for _ in 0..params.episodes {
        loop {
            let out = env.step(&random_action(params.space, &mut rng));
            steps += 1;
            if out.done {
                trace.push(steps, out.reward, out.breakdown.metric_values(), vec![]);
                final_rewards.push(out.reward);
                observe(steps, out.reward, env.state());
                break;
            }
        }
        env.reset(None);
    }
    let (mean, std) = mean_std(&final_rewards);
    Ok(RandomResult { final_rewards, mean, std, trace })
}
