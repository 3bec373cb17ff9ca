//! Rollout collection, update phases and inference.

use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::buffer::{compute_gae, RolloutBatch};
use super::config::PpoConfig;
use super::dist::{HeadLayout, HybridAction};
use super::policy::{LossConfig, LossStats, PolicyNet};
use crate::env::{ActionSpaceKind, EnvState, Observation, TransponderEnv};
use crate::error::{config_err, Result};
use crate::harness::mean_std;
use crate::profile::Profile;
use crate::rewards::MetricValues;
use crate::trace::{config_hash, RunTrace, TraceMeta};

const PPO_STREAM: u64 = 3;
const INFERENCE_STREAM: u64 = 4;

/// Extra trace columns written by the trainer.
pub const TRAIN_COLUMNS: [&str; 6] =
    ["mean_step_reward", "policy_loss", "value_loss", "entropy", "clip_fraction", "approx_kl"];

/// Seed of the `i`-th collection environment.
pub fn env_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

fn observation_matrix<'a>(states: impl ExactSizeIterator<Item = &'a EnvState>) -> Array2<f64> {
    let n = states.len();
    let mut m = Array2::zeros((n, Observation::DIM));
    for (i, s) in states.enumerate() {
        for (j, v) in s.observe().features().into_iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}

/// Summary of one collection phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    /// Mean reward at the last step of the episodes finished in the batch.
    pub mean_final_reward: f64,
    pub mean_step_reward: f64,
    pub episodes_finished: usize,
    /// Metric means over every step of the batch.
    pub metrics: MetricValues,
    /// Final configuration of the last episode finished in the batch.
    #[serde(default)]
    pub last_final_state: Option<EnvState>,
}

/// Everything produced by one collect-and-update iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub env_steps: u64,
    pub batch: BatchStats,
    pub loss: LossStats,
}

/// PPO learner with its collection environments.
#[derive(Debug, Clone)]
pub struct PpoTrainer {
    pub(crate) profile: Arc<Profile>,
    pub(crate) space: ActionSpaceKind,
    pub(crate) config: PpoConfig,
    pub(crate) net: PolicyNet<f32>,
    pub(crate) adam: Adam<f32>,
    pub(crate) envs: Vec<TransponderEnv>,
    pub(crate) rng: ChaCha8Rng,
    pub(crate) env_steps: u64,
    pub(crate) policy_version: u64,
    pub(crate) trace: RunTrace,
}

impl PpoTrainer {
    pub fn new(profile: Arc<Profile>, space: ActionSpaceKind, config: PpoConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(PPO_STREAM);
        let net = PolicyNet::new(Observation::DIM, &config.hidden, HeadLayout::for_space(space), &mut rng);
        let shapes: Vec<usize> = net.tensors().iter().map(|t| t.len()).collect();
        let mut envs = Vec::with_capacity(config.num_envs);
        for i in 0..config.num_envs {
            let mut env = TransponderEnv::new(profile.clone(), space)?;
            env.reset(Some(env_seed(config.seed, i)));
            envs.push(env);
        }
        let meta = TraceMeta {
            optimizer: "ppo".into(),
            seed: config.seed,
            config_hash: config_hash(&(&config, space, profile.as_ref())),
        };
        Ok(Self {
            profile,
            space,
            net,
            adam: Adam::new(&shapes),
            envs,
            rng,
            env_steps: 0,
            policy_version: 0,
            trace: RunTrace::new(meta, &TRAIN_COLUMNS),
            config,
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    pub fn space(&self) -> ActionSpaceKind {
        self.space
    }

    pub fn profile(&self) -> &Arc<Profile> {
        &self.profile
    }

    pub fn net(&self) -> &PolicyNet<f32> {
        &self.net
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn policy_version(&self) -> u64 {
        self.policy_version
    }

    pub fn is_finished(&self) -> bool {
        self.env_steps >= self.config.total_steps
    }

    /// Collects `batch_size` transitions with the current parameters.
    pub fn collect(&mut self) -> Result<(RolloutBatch, BatchStats)> {
        let n_env = self.envs.len();
        let horizon = self.config.batch_size / n_env;
        let mut obs_rows: Vec<Vec<[f64; Observation::DIM]>> = vec![Vec::with_capacity(horizon); n_env];
        let mut actions: Vec<Vec<HybridAction>> = vec![Vec::with_capacity(horizon); n_env];
        let mut log_probs = vec![Vec::with_capacity(horizon); n_env];
        let mut rewards = vec![Vec::with_capacity(horizon); n_env];
        let mut values = vec![Vec::with_capacity(horizon); n_env];
        let mut dones = vec![Vec::with_capacity(horizon); n_env];
        let mut finals = Vec::new();
        let mut last_final_state = None;
        let mut metric_sum = [0.0; 8];

        for _ in 0..horizon {
            let obs = observation_matrix(self.envs.iter().map(TransponderEnv::state));
            let out = self.net.forward(&obs)?;
            for (i, env) in self.envs.iter_mut().enumerate() {
                let (action, lp) = out.dist(i, &self.net.layout).sample(&mut self.rng);
                let step = env.step(&action.to_env_action(self.space));
                let mut row = [0.0; Observation::DIM];
                row.copy_from_slice(obs.row(i).as_slice().expect("standard layout"));
                obs_rows[i].push(row);
                actions[i].push(action);
                log_probs[i].push(lp);
                rewards[i].push(step.reward);
                values[i].push(out.values[i]);
                dones[i].push(step.done);
                for (acc, v) in metric_sum.iter_mut().zip(step.breakdown.metric_values().to_array()) {
                    *acc += v;
                }
                if step.done {
                    finals.push(step.reward);
                    last_final_state = Some(env.state().clone());
                    env.reset(None);
                }
            }
        }
        let last_obs = observation_matrix(self.envs.iter().map(TransponderEnv::state));
        let last_values = self.net.forward(&last_obs)?.values;

        let total = horizon * n_env;
        let mut batch = RolloutBatch {
            observations: Array2::zeros((total, Observation::DIM)),
            actions: Vec::with_capacity(total),
            log_prob_old: Vec::with_capacity(total),
            rewards: Vec::with_capacity(total),
            values: Vec::with_capacity(total),
            dones: Vec::with_capacity(total),
            advantages: Vec::with_capacity(total),
            returns: Vec::with_capacity(total),
            policy_version: self.policy_version,
        };
        for i in 0..n_env {
            let (adv, ret) = compute_gae(
                &rewards[i],
                &values[i],
                &dones[i],
                last_values[i],
                self.config.gamma,
                self.config.gae_lambda,
            );
            for (t, row) in obs_rows[i].iter().enumerate() {
                let r = i * horizon + t;
                batch.observations.row_mut(r).iter_mut().zip(row).for_each(|(dst, &src)| *dst = src);
            }
            batch.actions.append(&mut actions[i]);
            batch.log_prob_old.append(&mut log_probs[i]);
            batch.rewards.extend_from_slice(&rewards[i]);
            batch.values.extend_from_slice(&values[i]);
            batch.dones.extend_from_slice(&dones[i]);
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
        }
        self.env_steps += total as u64;

        let mean_step_reward = batch.rewards.iter().sum::<f64>() / total as f64;
        let stats = BatchStats {
            mean_final_reward: if finals.is_empty() { mean_step_reward } else { finals.iter().sum::<f64>() / finals.len() as f64 },
            mean_step_reward,
            episodes_finished: finals.len(),
            metrics: MetricValues::from_array(metric_sum.map(|s| s / total as f64)),
            last_final_state,
        };
        Ok((batch, stats))
    }

    /// Runs `sgd_epochs` passes of shuffled minibatches over `batch`, then
    /// retires the parameter version that generated it.
    pub fn update(&mut self, mut batch: RolloutBatch) -> Result<LossStats> {
        if batch.policy_version != self.policy_version {
            return Err(config_err(format!(
                "batch from policy version {} cannot update version {}",
                batch.policy_version, self.policy_version
            )));
        }
        if self.config.normalize_advantages {
            batch.normalize_advantages();
        }
        let cfg = LossConfig {
            clip_epsilon: self.config.clip_epsilon,
            vf_coeff: self.config.vf_coeff,
            entropy_coeff: self.config.entropy_coeff,
        };
        let mut indices: Vec<usize> = (0..batch.len()).collect();
        let mut acc = LossStats::default();
        let mut count = 0usize;
        for _ in 0..self.config.sgd_epochs {
            indices.shuffle(&mut self.rng);
            for chunk in indices.chunks(self.config.minibatch_size) {
                let (stats, grads) = self.net.loss_and_grad(&batch, chunk, &cfg)?;
                let norm = grads.global_norm();
                let max = self.config.max_grad_norm;
                let scale = if max > 0.0 && norm > max { max / norm } else { 1.0 };
                self.adam.step(self.net.tensors_mut(), grads.tensors(), self.config.learning_rate, scale);
                acc.total += stats.total;
                acc.policy += stats.policy;
                acc.value += stats.value;
                acc.entropy += stats.entropy;
                acc.clip_fraction += stats.clip_fraction;
                acc.approx_kl += stats.approx_kl;
                count += 1;
            }
        }
        let c = count as f64;
        self.policy_version += 1;
        Ok(LossStats {
            total: acc.total / c,
            policy: acc.policy / c,
            value: acc.value / c,
            entropy: acc.entropy / c,
            clip_fraction: acc.clip_fraction / c,
            approx_kl: acc.approx_kl / c,
        })
    }

    /// One collect-and-update iteration; appends a trace point.
    pub fn iterate(&mut self) -> Result<IterationReport> {
        let (batch, stats) = self.collect()?;
        let loss = self.update(batch)?;
        self.trace.push(
            self.env_steps,
            stats.mean_final_reward,
            stats.metrics,
            vec![stats.mean_step_reward, loss.policy, loss.value, loss.entropy, loss.clip_fraction, loss.approx_kl],
        );
        Ok(IterationReport { env_steps: self.env_steps, batch: stats, loss })
    }

    /// Iterates until `total_steps` environment steps are consumed.
    /// `on_iteration` sees every report, e.g. for progress streaming.
    pub fn run(&mut self, mut on_iteration: impl FnMut(&IterationReport)) -> Result<()> {
        while !self.is_finished() {
            let report = self.iterate()?;
            on_iteration(&report);
        }
        Ok(())
    }

    pub fn into_parts(self) -> (PolicyNet<f32>, RunTrace) {
        (self.net, self.trace)
    }
}

/// Trains a fresh policy for `config.total_steps` steps.
pub fn train(profile: Arc<Profile>, space: ActionSpaceKind, config: PpoConfig) -> Result<(PolicyNet<f32>, RunTrace)> {
    let mut trainer = PpoTrainer::new(profile, space, config)?;
    trainer.run(|_| {})?;
    Ok(trainer.into_parts())
}

/// How inference picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// `sigmoid(mean)` and arg-max heads.
    #[default]
    Deterministic,
    /// Samples from the policy.
    Stochastic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Reward at the last step of each episode.
    pub final_rewards: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub final_metrics: MetricValues,
    /// Final configuration of each episode.
    pub final_states: Vec<EnvState>,
    /// Final configuration of the best episode.
    pub proposal: EnvState,
    pub proposal_reward: f64,
}

/// Plays `episodes` full episodes without updating `net`.
pub fn inference(
    net: &PolicyNet<f32>,
    profile: Arc<Profile>,
    space: ActionSpaceKind,
    episodes: usize,
    seed: u64,
    mode: InferenceMode,
) -> Result<InferenceResult> {
    if episodes == 0 {
        return Err(config_err("inference needs at least one episode"));
    }
    if net.layout != HeadLayout::for_space(space) {
        return Err(config_err(format!("policy heads do not match {space}")));
    }
    let mut env = TransponderEnv::new(profile, space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INFERENCE_STREAM);
    env.reset(Some(seed));
    let mut final_rewards = Vec::with_capacity(episodes);
    let mut metrics = Vec::with_capacity(episodes);
    let mut final_states = Vec::with_capacity(episodes);
    let mut proposal: Option<(EnvState, f64)> = None;
    for _ in 0..episodes {
        loop {
            let obs = observation_matrix(std::iter::once(env.state()));
            let out = net.forward(&obs)?;
            let dist = out.dist(0, &net.layout);
            let action = match mode {
                InferenceMode::Deterministic => dist.mode(),
                InferenceMode::Stochastic => dist.sample(&mut rng).0,
            };
            let step = env.step(&action.to_env_action(space));
            if step.done {
                final_rewards.push(step.reward);
                metrics.push(step.breakdown.metric_values());
                final_states.push(env.state().clone());
                if proposal.as_ref().is_none_or(|(_, r)| step.reward > *r) {
                    proposal = Some((env.state().clone(), step.reward));
                }
                break;
            }
        }
        env.reset(None);
    }
    let (mean, std) = mean_std(&final_rewards);
    let (proposal, proposal_reward) = proposal.expect("at least one episode ran");
    Ok(InferenceResult { final_rewards, mean, std, final_metrics: MetricValues::mean(&metrics), final_states, proposal, proposal_reward })
}
