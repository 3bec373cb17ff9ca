//! Simulated annealing over full (space 1) configurations.
//!
//! Maximizes the environment reward directly: a proposal is accepted when
//! `delta = proposed - current >= 0`, otherwise with probability
//! `exp(delta / T)`. The temperature follows a stepped geometric schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::{apply_space1, ActionSpace1, ActionSpaceKind, EnvState, TransponderEnv, NUM_MODFEC};
use crate::error::{config_err, Result};
use crate::rewards::RewardBreakdown;
use crate::trace::{config_hash, RunTrace, TraceMeta};

/// Neighbor step size at full and at zero temperature.
pub const SIGMA_MAX: f64 = 0.3;
pub const SIGMA_MIN: f64 = 0.01;

const PROPOSAL_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaParams {
    pub t_max: f64,
    pub t_min: f64,
    /// Geometric cooling multiplier.
    pub alpha: f64,
    /// Iterations at each temperature level.
    pub steps_per_temp: u64,
    /// Neighbor step size is divided by `1 + damping * step`.
    pub damping: f64,
    /// Cost evaluations, including the initial random configuration.
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self { t_max: 100.0, t_min: 0.0, alpha: 0.95, steps_per_temp: 100, damping: 0.0, max_steps: 50_000, seed: 0 }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min >= 0.0) || !(self.t_max > self.t_min) || !self.t_max.is_finite() {
            return Err(config_err(format!("need t_max > t_min >= 0 (got {} and {})", self.t_max, self.t_min)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err(format!("alpha must lie in (0, 1) (got {})", self.alpha)));
        }
        if self.steps_per_temp == 0 {
            return Err(config_err("steps_per_temp must be at least 1"));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(config_err(format!("damping must be non-negative (got {})", self.damping)));
        }
        if self.max_steps == 0 {
            return Err(config_err("max_steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SaResult {
    pub best_action: ActionSpace1,
    pub best_reward: f64,
    pub best_breakdown: RewardBreakdown,
    /// One point per evaluation. `total_reward` and the metrics follow the
    /// best configuration; extras are `temp`, `current_reward`, `best_reward`.
    pub trace: RunTrace,
}

/// `max(t_min, t_max * alpha^floor(step / steps_per_temp))`.
pub fn temperature(step: u64, params: &SaParams) -> f64 {
    let level = step / params.steps_per_temp;
    let t = params.t_max * params.alpha.powf(level as f64);
    t.max(params.t_min)
}

fn log_temperature(step: u64, params: &SaParams) -> f64 {
    let level = (step / params.steps_per_temp) as f64;
    (params.t_max.ln() + level * params.alpha.ln()).max(params.t_min.ln())
}

/// Position of the temperature at `step` between the last step's and the
/// initial temperature, on a log scale: 1 at `t_max`, 0 at the end of the
/// run. Under a geometric schedule it falls linearly with the cooling level.
pub fn temp_fraction(step: u64, params: &SaParams) -> f64 {
    let top = params.t_max.ln();
    let end = log_temperature(params.max_steps.saturating_sub(1), params);
    if !(end < top) {
        return 1.0;
    }
    ((log_temperature(step, params) - end) / (top - end)).clamp(0.0, 1.0)
}

/// Probability of moving to a proposal that changes the reward by `delta`.
pub fn acceptance_probability(delta: f64, temp: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else if temp <= 0.0 {
        0.0
    } else {
        (delta / temp).exp()
    }
}

/// Neighbor step size for a temperature fraction in `[0, 1]`.
pub fn neighbor_sigma(temp_fraction: f64) -> f64 {
    let f = temp_fraction.clamp(0.0, 1.0);
    SIGMA_MAX * f + SIGMA_MIN * (1.0 - f)
}

/// Probability that a discrete component is resampled.
pub fn resample_probability(temp_fraction: f64) -> f64 {
    0.1 * temp_fraction.clamp(0.0, 1.0) + 0.02
}

/// Perturbs every continuous component with Gaussian noise and resamples
/// each MOD-FEC index with a temperature-dependent probability.
pub fn neighbor<R: Rng + ?Sized>(current: &ActionSpace1, temp_fraction: f64, rng: &mut R) -> ActionSpace1 {
    neighbor_scaled(current, temp_fraction, 1.0, rng)
}

fn neighbor_scaled<R: Rng + ?Sized>(current: &ActionSpace1, temp_fraction: f64, scale: f64, rng: &mut R) -> ActionSpace1 {
    let sigma = neighbor_sigma(temp_fraction) * scale;
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    let p = resample_probability(temp_fraction);
    let mut next = current.clone();
    for link in &mut next.links {
        link.center_freq_norm = (link.center_freq_norm + noise.sample(rng)).clamp(0.0, 1.0);
        link.eirp_norm = (link.eirp_norm + noise.sample(rng)).clamp(0.0, 1.0);
        if rng.random::<f64>() < p {
            link.modfec_index = rng.random_range(0..NUM_MODFEC);
        }
    }
    next
}

/// Runs annealing for exactly `params.max_steps` reward evaluations on a
/// space-1 environment.
pub fn sa_run(env: &mut TransponderEnv, params: &SaParams) -> Result<SaResult> {
    sa_run_observed(env, params, |_, _, _| {})
}

/// [`sa_run`], calling `observe(step, best_reward, best_state)` at every
/// trace point.
pub fn sa_run_observed(
    env: &mut TransponderEnv,
    params: &SaParams,
    mut observe: impl FnMut(u64, f64, &EnvState),
) -> Result<SaResult> {
    params.validate()?;
    if env.space() != ActionSpaceKind::Space1 {
        return Err(config_err("simulated annealing operates on the space-1 environment"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(PROPOSAL_STREAM);
    let meta = TraceMeta { optimizer: "sa".into(), seed: params.seed, config_hash: config_hash(params) };
    let mut trace = RunTrace::new(meta, &["temp", "current_reward", "best_reward"]);

    env.reset(Some(params.seed));
    let evaluate = |env: &mut TransponderEnv, action: &ActionSpace1| {
        let out = env.step_space1(action);
        if out.done {
            env.reset(None);
        }
        out.breakdown
    };

    let mut current = ActionSpace1::sample(&mut rng);
    let mut best_breakdown = evaluate(env, &current);
    let mut current_reward = best_breakdown.total;
    let mut best = current.clone();
    let mut best_reward = current_reward;
    let profile = env.profile().clone();
    let mut best_state = apply_space1(env.state(), &best, &profile);
    let t0 = temperature(0, params);
    trace.push(1, best_reward, best_breakdown.metric_values(), vec![t0, current_reward, best_reward]);
    observe(1, best_reward, &best_state);

    for step in 1..params.max_steps {
        let temp = temperature(step, params);
        let fraction = temp_fraction(step, params);
        let scale = 1.0 / (1.0 + params.damping * step as f64);
        let proposal = neighbor_scaled(&current, fraction, scale, &mut rng);
        let breakdown = evaluate(env, &proposal);
        let delta = breakdown.total - current_reward;
        let accept = delta >= 0.0 || rng.random::<f64>() < acceptance_probability(delta, temp);
        if accept {
            current = proposal;
            current_reward = breakdown.total;
            if current_reward > best_reward {
                best_reward = current_reward;
                best = current.clone();
                best_breakdown = breakdown;
                best_state = apply_space1(&best_state, &best, &profile);
            }
        }
        if !best_reward.is_finite() {
            return Err(crate::Error::NonFinite { context: "simulated annealing", detail: format!("reward at step {step}") });
        }
        trace.push(step + 1, best_reward, best_breakdown.metric_values(), vec![temp, current_reward, best_reward]);
        observe(step + 1, best_reward, &best_state);
    }
    Ok(SaResult { best_action: best, best_reward, best_breakdown, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use std::sync::Arc;

    fn env() -> TransponderEnv {
        TransponderEnv::new(Arc::new(Profile::default()), ActionSpaceKind::Space1).unwrap()
    }

    #[test]
    fn temperature_schedule() {
        let p = SaParams { alpha: 0.9, steps_per_temp: 100, ..SaParams::default() };
        assert_eq!(temperature(0, &p), 100.0);
        assert_eq!(temperature(99, &p), 100.0);
        assert!((temperature(100, &p) - 90.0).abs() < 1e-12);
        let floored = SaParams { t_min: 1.0, ..p.clone() };
        assert_eq!(temperature(1_000_000, &floored), 1.0);
        let mut last = f64::INFINITY;
        for s in (0..10_000).step_by(37) {
            let t = temperature(s, &p);
            assert!(t <= last);
            last = t;
        }
    }

    #[test]
    fn acceptance_rule() {
        assert_eq!(acceptance_probability(0.1, 100.0), 1.0);
        assert_eq!(acceptance_probability(0.0, 0.0), 1.0);
        assert!((acceptance_probability(-0.1, 100.0) - (-0.001f64).exp()).abs() < 1e-15);
        assert_eq!(acceptance_probability(-0.1, 0.0), 0.0);
    }

    #[test]
    fn neighbor_step_size_endpoints() {
        assert_eq!(neighbor_sigma(1.0), 0.3);
        assert_eq!(neighbor_sigma(0.0), 0.01);
        assert!((resample_probability(1.0) - 0.12).abs() < 1e-15);
        assert_eq!(resample_probability(0.0), 0.02);
    }

    #[test]
    fn neighbor_is_deterministic_and_clamped() {
        let start = ActionSpace1::uniform(0.99, 0.01, 1);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let x = neighbor(&start, 1.0, &mut a);
            assert_eq!(x, neighbor(&start, 1.0, &mut b));
            for l in &x.links {
                assert!((0.0..=1.0).contains(&l.center_freq_norm));
                assert!((0.0..=1.0).contains(&l.eirp_norm));
            }
        }
    }

    #[test]
    fn evaluation_count_and_best_retention() {
        let params = SaParams { max_steps: 1234, seed: 3, ..SaParams::default() };
        let r = sa_run(&mut env(), &params).unwrap();
        assert_eq!(r.trace.len(), 1234);
        let best = r.trace.extra_series("best_reward").unwrap();
        let current = r.trace.extra_series("current_reward").unwrap();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
        let max_current = current.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.best_reward, max_current);
        assert_eq!(r.best_breakdown.total, r.best_reward);
    }

    #[test]
    fn deterministic_under_seed() {
        let params = SaParams { max_steps: 500, seed: 7, ..SaParams::default() };
        let a = sa_run(&mut env(), &params).unwrap();
        let b = sa_run(&mut env(), &params).unwrap();
        assert_eq!(a.best_action, b.best_action);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn near_zero_temperature_is_hill_climbing() {
        let params = SaParams { t_max: f64::MIN_POSITIVE, max_steps: 3000, seed: 1, ..SaParams::default() };
        let r = sa_run(&mut env(), &params).unwrap();
        let current = r.trace.extra_series("current_reward").unwrap();
        assert!(current.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rejects_space2_env() {
        let mut e = TransponderEnv::new(Arc::new(Profile::default()), ActionSpaceKind::Space2).unwrap();
        assert!(sa_run(&mut e, &SaParams::default()).is_err());
    }
}
