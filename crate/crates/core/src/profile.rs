//! Environment profile: everything that parameterizes an experiment's
//! physics and reward, loaded from a TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{ActionSpaceKind, LinkDemand, ModFec, TransponderSpec, NUM_MODFEC};
use crate::error::{config_err, Result};
use crate::rewards::MetricWeights;

/// The profile shipped with the crate.
pub const DEFAULT_PROFILE_TOML: &str = include_str!("../profiles/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLengths {
    pub space1: u32,
    pub space2: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// A link's power share over bandwidth share must lie in
    /// `[1 / peb_ratio_max, peb_ratio_max]`.
    pub peb_ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub transponder: TransponderSpec,
    pub demand: LinkDemand,
    /// Upper end of the per-link EIRP range, W.
    pub link_eirp_max: f64,
    pub modfec: Vec<ModFec>,
    pub episodes: EpisodeLengths,
    pub rewards: RewardParams,
    pub weights: MetricWeights,
}

impl Default for Profile {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_PROFILE_TOML).expect("bundled default profile is valid")
    }
}

impl Profile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Profile = toml::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.transponder.validate()?;
        self.demand.validate()?;
        if self.modfec.len() != NUM_MODFEC {
            return Err(config_err(format!(
                "MOD-FEC catalog must have exactly {NUM_MODFEC} entries (got {})",
                self.modfec.len()
            )));
        }
        for m in &self.modfec {
            m.validate()?;
        }
        if !(self.link_eirp_max > 0.0) || !self.link_eirp_max.is_finite() {
            return Err(config_err(format!("link_eirp_max must be positive (got {})", self.link_eirp_max)));
        }
        if self.episodes.space1 == 0 || self.episodes.space2 == 0 {
            return Err(config_err("episode lengths must be at least 1"));
        }
        if !(self.rewards.peb_ratio_max >= 1.0) || !self.rewards.peb_ratio_max.is_finite() {
            return Err(config_err(format!(
                "peb_ratio_max must be >= 1 (got {})",
                self.rewards.peb_ratio_max
            )));
        }
        self.weights.validate()
    }

    pub fn episode_length(&self, space: ActionSpaceKind) -> u32 {
        match space {
            ActionSpaceKind::Space1 => self.episodes.space1,
            ActionSpaceKind::Space2 => self.episodes.space2,
        }
    }

    pub fn with_weights(mut self, weights: MetricWeights) -> Self {
        self.weights = weights;
        self
    }
}
