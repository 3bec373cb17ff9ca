//! Transponder environment: physical model, action spaces, observations and
//! the episode protocol.

mod action;
mod types;

pub use action::{ActionSpace1, ActionSpace2, ActionSpaceKind, LinkAction, LinkParam};
pub use types::{EnvState, LinkConfig, LinkDemand, LinkObservation, ModFec, Observation, TransponderSpec};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::profile::Profile;
use crate::rewards::{self, RewardBreakdown};

/// Number of links configured on the transponder.
pub const NUM_LINKS: usize = 3;
/// Number of MOD-FEC combinations available to every link.
pub const NUM_MODFEC: usize = 3;

/// Occupied bandwidth of a link in Hz.
///
/// Transfer rate, then symbol rate, then the shaped bandwidth:
/// `data_rate * oh * rs * fec`, `* mod`, `* (1 + rollout + spacing)`.
pub fn compute_bandwidth(demand: &LinkDemand, modfec: &ModFec) -> f64 {
    let transfer_rate = demand.data_rate * demand.oh_factor * demand.rs_factor * modfec.fec_factor;
    let symbol_rate = transfer_rate * modfec.mod_factor;
    symbol_rate * (1.0 + demand.rollout_factor + demand.spacing_factor)
}

/// Maps a normalized action component onto `[lo, hi]`. `norm` is clamped to
/// `[0, 1]` first.
pub fn denormalize(norm: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(config_err(format!("denormalize range is empty: lo={lo}, hi={hi}")));
    }
    Ok(denormalize_unchecked(norm, lo, hi))
}

pub(crate) fn denormalize_unchecked(norm: f64, lo: f64, hi: f64) -> f64 {
    let n = clamp_unit(norm);
    lo + n * (hi - lo)
}

/// Clamps to `[0, 1]`; NaN maps to 0.
pub(crate) fn clamp_unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub done: bool,
}

/// Either action encoding, for code that is generic over the action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Full(ActionSpace1),
    Edit(ActionSpace2),
}

/// Overwrites every parameter of every link.
pub fn apply_space1(state: &EnvState, action: &ActionSpace1, profile: &Profile) -> EnvState {
    let links = std::array::from_fn(|i| {
        let a = &action.links[i];
        LinkConfig::new(a.center_freq_norm, a.eirp_norm, a.modfec_index, profile)
    });
    EnvState { links, transponder: state.transponder.clone(), step_count: state.step_count }
}

/// Changes exactly one parameter of one link; everything else is copied.
pub fn apply_space2(state: &EnvState, action: &ActionSpace2, profile: &Profile) -> EnvState {
    let mut next = state.clone();
    let idx = action.link_index.min(NUM_LINKS - 1);
    let link = &state.links[idx];
    next.links[idx] = match action.param {
        LinkParam::CenterFreq => {
            LinkConfig::new(action.continuous_value, link.eirp_norm(), link.modfec_index(), profile)
        }
        LinkParam::Eirp => {
            LinkConfig::new(link.center_freq_norm(), action.continuous_value, link.modfec_index(), profile)
        }
        LinkParam::ModFec => {
            LinkConfig::new(link.center_freq_norm(), link.eirp_norm(), action.discrete_value, profile)
        }
    };
    next
}

/// Resumable copy of an environment's mutable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub state: EnvState,
    pub rng: ChaCha8Rng,
}

/// Seedable transponder environment.
///
/// One instance is single-threaded. All randomness (only the initial state at
/// reset) comes from the instance-owned generator.
#[derive(Debug, Clone)]
pub struct TransponderEnv {
    profile: Arc<Profile>,
    space: ActionSpaceKind,
    state: EnvState,
    rng: ChaCha8Rng,
}

impl TransponderEnv {
    pub fn new(profile: Arc<Profile>, space: ActionSpaceKind) -> Result<Self> {
        profile.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let state = Self::sample_state(&profile, &mut rng);
        Ok(Self { profile, space, state, rng })
    }

    pub fn profile(&self) -> &Arc<Profile> {
        &self.profile
    }

    pub fn space(&self) -> ActionSpaceKind {
        self.space
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn episode_length(&self) -> u32 {
        self.profile.episode_length(self.space)
    }

    /// Resamples the initial state. `Some(seed)` reseeds the generator first,
    /// `None` continues the current stream.
    pub fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.state = Self::sample_state(&self.profile, &mut self.rng);
        self.state.observe()
    }

    fn sample_state(profile: &Profile, rng: &mut ChaCha8Rng) -> EnvState {
        let links = std::array::from_fn(|_| {
            let center = rng.random::<f64>();
            let eirp = rng.random::<f64>();
            let modfec = rng.random_range(0..NUM_MODFEC);
            LinkConfig::new(center, eirp, modfec, profile)
        });
        EnvState { links, transponder: profile.transponder.clone(), step_count: 0 }
    }

    pub fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot { state: self.state.clone(), rng: self.rng.clone() }
    }

    /// Restores state and generator from [`TransponderEnv::snapshot`].
    pub fn restore(&mut self, snapshot: EnvSnapshot) {
        self.state = snapshot.state;
        self.rng = snapshot.rng;
    }

    /// Replaces the current state, e.g. to reproduce a recorded configuration.
    pub fn set_state(&mut self, state: EnvState) {
        self.state = state;
    }

    pub fn step_space1(&mut self, action: &ActionSpace1) -> StepOutcome {
        let next = apply_space1(&self.state, action, &self.profile);
        self.advance(next)
    }

    pub fn step_space2(&mut self, action: &ActionSpace2) -> StepOutcome {
        let next = apply_space2(&self.state, action, &self.profile);
        self.advance(next)
    }

    pub fn step(&mut self, action: &Action) -> StepOutcome {
        match action {
            Action::Full(a) => self.step_space1(a),
            Action::Edit(a) => self.step_space2(a),
        }
    }

    fn advance(&mut self, mut next: EnvState) -> StepOutcome {
        next.step_count = self.state.step_count + 1;
        self.state = next;
        let breakdown = rewards::total_reward(&self.state, &self.profile, &self.profile.weights);
        StepOutcome {
            observation: self.state.observe(),
            reward: breakdown.total,
            breakdown,
            done: self.state.step_count >= self.episode_length(),
        }
    }

    /// Reward of the current state without stepping.
    pub fn evaluate(&self) -> RewardBreakdown {
        rewards::total_reward(&self.state, &self.profile, &self.profile.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(space: ActionSpaceKind) -> TransponderEnv {
        TransponderEnv::new(Arc::new(Profile::default()), space).unwrap()
    }

    fn unit_demand(data_rate: f64) -> LinkDemand {
        LinkDemand {
            data_rate,
            oh_factor: 1.0,
            rs_factor: 1.0,
            overhead: 1.0,
            spacing_factor: 1.0,
            rollout_factor: 1.0,
        }
    }

    fn modfec(mod_factor: f64, fec_factor: f64) -> ModFec {
        ModFec { name: String::new(), mod_factor, fec_factor, min_eirp_per_rate: 1.0 }
    }

    #[test]
    fn bandwidth_examples() {
        assert_eq!(compute_bandwidth(&unit_demand(1.0), &modfec(1.0, 1.0)), 3.0);
        assert_eq!(compute_bandwidth(&unit_demand(0.0), &modfec(2.0, 0.5)), 0.0);
        assert_eq!(compute_bandwidth(&unit_demand(2.0), &modfec(2.0, 0.5)), 6.0);
    }

    #[test]
    fn denormalize_endpoints_and_midpoint() {
        assert_eq!(denormalize(0.0, 950e6, 1150e6).unwrap(), 950e6);
        assert_eq!(denormalize(1.0, 950e6, 1150e6).unwrap(), 1150e6);
        assert_eq!(denormalize(0.5, 0.0, 200.0).unwrap(), 100.0);
        assert_eq!(denormalize(1.7, 0.0, 200.0).unwrap(), 200.0);
        assert_eq!(denormalize(-3.0, 0.0, 200.0).unwrap(), 0.0);
        assert!(denormalize(0.5, 1.0, 1.0).is_err());
        assert!(denormalize(0.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let mut a = env(ActionSpaceKind::Space1);
        let mut b = env(ActionSpaceKind::Space1);
        assert_eq!(a.reset(Some(0)), b.reset(Some(0)));
        assert_ne!(a.reset(Some(0)), a.reset(Some(1)));
        assert_eq!(a.state().step_count, 0);
    }

    #[test]
    fn reset_bandwidth_pct_matches_derived_bandwidth() {
        let mut e = env(ActionSpaceKind::Space1);
        for seed in 0..20 {
            let obs = e.reset(Some(seed));
            let p = e.profile().clone();
            for (lo, link) in obs.links.iter().zip(e.state().links.iter()) {
                let bw = compute_bandwidth(&p.demand, &p.modfec[lo.modfec_index]);
                assert_eq!(link.bandwidth(), bw);
                assert_eq!(lo.link_bandwidth_pct, bw / p.transponder.total_bandwidth());
            }
        }
    }

    #[test]
    fn space1_episode_terminates_after_ten_steps() {
        let mut e = env(ActionSpaceKind::Space1);
        e.reset(Some(3));
        let action = ActionSpace1::uniform(0.5, 0.5, 0);
        for i in 1..=10 {
            let out = e.step_space1(&action);
            assert_eq!(out.done, i == 10);
        }
    }

    #[test]
    fn space2_single_mutation() {
        let mut e = env(ActionSpaceKind::Space2);
        e.reset(Some(11));
        let before = e.state().clone();
        let out = e.step_space2(&ActionSpace2 {
            link_index: 0,
            param: LinkParam::Eirp,
            continuous_value: 0.3,
            discrete_value: 2,
        });
        let after = e.state();
        assert_eq!(after.links[1], before.links[1]);
        assert_eq!(after.links[2], before.links[2]);
        assert_eq!(after.links[0].eirp_norm(), 0.3);
        assert_eq!(after.links[0].center_freq_norm(), before.links[0].center_freq_norm());
        assert_eq!(after.links[0].modfec_index(), before.links[0].modfec_index());
        assert!((0.0..=1.0).contains(&out.reward));
    }

    #[test]
    fn space2_modfec_edit_recomputes_bandwidth() {
        let mut e = env(ActionSpaceKind::Space2);
        e.reset(Some(5));
        e.step_space2(&ActionSpace2 {
            link_index: 1,
            param: LinkParam::ModFec,
            continuous_value: 0.9,
            discrete_value: 2,
        });
        let p = e.profile().clone();
        let link = &e.state().links[1];
        assert_eq!(link.modfec_index(), 2);
        assert_eq!(link.bandwidth(), compute_bandwidth(&p.demand, &p.modfec[2]));
    }

    #[test]
    fn space2_episode_is_one_hundred_steps() {
        let e = env(ActionSpaceKind::Space2);
        assert_eq!(e.episode_length(), 100);
    }

    #[test]
    fn out_of_range_actions_are_clamped() {
        let mut e = env(ActionSpaceKind::Space1);
        e.reset(Some(0));
        let mut action = ActionSpace1::uniform(4.0, -2.0, 9);
        action.links[1].center_freq_norm = f64::NAN;
        let out = e.step_space1(&action);
        let p = e.profile().clone();
        for link in &e.state().links {
            assert!(link.center_freq() >= p.transponder.freq_lo && link.center_freq() <= p.transponder.freq_hi);
            assert!(link.eirp() >= 0.0 && link.eirp() <= p.link_eirp_max);
            assert!(link.modfec_index() < NUM_MODFEC);
        }
        assert!(out.reward.is_finite());
    }
}
