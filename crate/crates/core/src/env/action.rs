use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NUM_LINKS, NUM_MODFEC};
use crate::error::{config_err, Error};

/// Which action encoding an environment accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSpaceKind {
    /// Every parameter of every link is set each step.
    Space1,
    /// One parameter of one link is edited each step.
    Space2,
}

impl ActionSpaceKind {
    pub fn number(self) -> u8 {
        match self {
            ActionSpaceKind::Space1 => 1,
            ActionSpaceKind::Space2 => 2,
        }
    }
}

impl fmt::Display for ActionSpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "space{}", self.number())
    }
}

impl FromStr for ActionSpaceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "space1" => Ok(ActionSpaceKind::Space1),
            "2" | "space2" => Ok(ActionSpaceKind::Space2),
            other => Err(config_err(format!("unknown action space '{other}' (expected 1 or 2)"))),
        }
    }
}

/// Normalized settings for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkAction {
    pub center_freq_norm: f64,
    pub eirp_norm: f64,
    pub modfec_index: usize,
}

/// Full reconfiguration: all nine components every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace1 {
    pub links: [LinkAction; NUM_LINKS],
}

impl ActionSpace1 {
    /// Same settings for every link.
    pub fn uniform(center_freq_norm: f64, eirp_norm: f64, modfec_index: usize) -> Self {
        Self { links: [LinkAction { center_freq_norm, eirp_norm, modfec_index }; NUM_LINKS] }
    }

    /// Uniformly random action.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            links: std::array::from_fn(|_| LinkAction {
                center_freq_norm: rng.random(),
                eirp_norm: rng.random(),
                modfec_index: rng.random_range(0..NUM_MODFEC),
            }),
        }
    }
}

/// The parameter an [`ActionSpace2`] edit targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkParam {
    CenterFreq,
    Eirp,
    ModFec,
}

impl LinkParam {
    pub const ALL: [LinkParam; 3] = [LinkParam::CenterFreq, LinkParam::Eirp, LinkParam::ModFec];

    /// Out-of-range selectors clamp to the last parameter.
    pub fn from_index(i: usize) -> Self {
        Self::ALL[i.min(Self::ALL.len() - 1)]
    }
}

/// Single-parameter edit `(link, parameter, continuous, discrete)`.
///
/// Only one of `continuous_value` / `discrete_value` is read, depending on
/// `param`; the other is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace2 {
    pub link_index: usize,
    pub param: LinkParam,
    pub continuous_value: f64,
    pub discrete_value: usize,
}

impl ActionSpace2 {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            link_index: rng.random_range(0..NUM_LINKS),
            param: LinkParam::from_index(rng.random_range(0..3)),
            continuous_value: rng.random(),
            discrete_value: rng.random_range(0..NUM_MODFEC),
        }
    }
}
