use serde::{Deserialize, Serialize};

use super::{clamp_unit, compute_bandwidth, denormalize_unchecked, NUM_LINKS, NUM_MODFEC};
use crate::error::{config_err, Result};
use crate::profile::Profile;

/// Frequency span and power budget of one transponder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderSpec {
    /// Lower band edge, Hz.
    pub freq_lo: f64,
    /// Upper band edge, Hz.
    pub freq_hi: f64,
    /// Total EIRP available, W.
    pub total_eirp: f64,
}

impl TransponderSpec {
    pub fn total_bandwidth(&self) -> f64 {
        self.freq_hi - self.freq_lo
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.freq_hi > self.freq_lo) || !self.freq_lo.is_finite() || !self.freq_hi.is_finite() {
            return Err(config_err(format!(
                "transponder band must satisfy freq_hi > freq_lo (got {}..{})",
                self.freq_lo, self.freq_hi
            )));
        }
        if !(self.total_eirp > 0.0) || !self.total_eirp.is_finite() {
            return Err(config_err(format!("total_eirp must be positive (got {})", self.total_eirp)));
        }
        Ok(())
    }
}

/// One modulation / forward-error-correction pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModFec {
    #[serde(default)]
    pub name: String,
    pub mod_factor: f64,
    pub fec_factor: f64,
    /// Minimum EIRP per unit data rate, W/bps.
    pub min_eirp_per_rate: f64,
}

impl ModFec {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("mod_factor", self.mod_factor),
            ("fec_factor", self.fec_factor),
            ("min_eirp_per_rate", self.min_eirp_per_rate),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(format!("modfec '{}': {field} must be positive (got {v})", self.name)));
            }
        }
        Ok(())
    }
}

/// Traffic demand shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkDemand {
    /// bps.
    pub data_rate: f64,
    pub oh_factor: f64,
    pub rs_factor: f64,
    /// Not part of the bandwidth product; carried so profiles list every
    /// link-budget factor.
    pub overhead: f64,
    pub spacing_factor: f64,
    pub rollout_factor: f64,
}

impl LinkDemand {
    pub fn validate(&self) -> Result<()> {
        if !(self.data_rate > 0.0) || !self.data_rate.is_finite() {
            return Err(config_err(format!("data_rate must be positive (got {})", self.data_rate)));
        }
        for (field, v) in [
            ("oh_factor", self.oh_factor),
            ("rs_factor", self.rs_factor),
            ("overhead", self.overhead),
            ("spacing_factor", self.spacing_factor),
            ("rollout_factor", self.rollout_factor),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(config_err(format!("{field} must be non-negative (got {v})")));
            }
        }
        Ok(())
    }

    /// Minimum EIRP the link needs with the given MOD-FEC, W.
    pub fn min_required_eirp(&self, modfec: &ModFec) -> f64 {
        self.data_rate * modfec.min_eirp_per_rate
    }
}

/// Decision variables of one link plus its derived bandwidth.
///
/// The normalized coordinates are stored alongside the physical values so an
/// observation reconstructs the state bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    center_freq_norm: f64,
    eirp_norm: f64,
    center_freq: f64,
    eirp: f64,
    modfec_index: usize,
    bandwidth: f64,
}

impl LinkConfig {
    /// Builds a link from normalized action components. Continuous values are
    /// clamped to `[0, 1]`, the MOD-FEC index to the catalog.
    pub fn new(center_freq_norm: f64, eirp_norm: f64, modfec_index: usize, profile: &Profile) -> Self {
        let center_freq_norm = clamp_unit(center_freq_norm);
        let eirp_norm = clamp_unit(eirp_norm);
        let modfec_index = modfec_index.min(NUM_MODFEC - 1);
        let t = &profile.transponder;
        Self {
            center_freq_norm,
            eirp_norm,
            center_freq: denormalize_unchecked(center_freq_norm, t.freq_lo, t.freq_hi),
            eirp: denormalize_unchecked(eirp_norm, 0.0, profile.link_eirp_max),
            modfec_index,
            bandwidth: compute_bandwidth(&profile.demand, &profile.modfec[modfec_index]),
        }
    }

    /// Builds a link at explicit physical values, e.g. a hand-made geometry.
    /// Values are not clamped.
    pub fn from_physical(center_freq: f64, eirp: f64, modfec_index: usize, profile: &Profile) -> Self {
        let t = &profile.transponder;
        let modfec_index = modfec_index.min(NUM_MODFEC - 1);
        Self {
            center_freq_norm: (center_freq - t.freq_lo) / t.total_bandwidth(),
            eirp_norm: eirp / profile.link_eirp_max,
            center_freq,
            eirp,
            modfec_index,
            bandwidth: compute_bandwidth(&profile.demand, &profile.modfec[modfec_index]),
        }
    }

    pub fn center_freq_norm(&self) -> f64 {
        self.center_freq_norm
    }

    pub fn eirp_norm(&self) -> f64 {
        self.eirp_norm
    }

    /// Hz.
    pub fn center_freq(&self) -> f64 {
        self.center_freq
    }

    /// W.
    pub fn eirp(&self) -> f64 {
        self.eirp
    }

    pub fn modfec_index(&self) -> usize {
        self.modfec_index
    }

    /// Hz.
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `(lo, hi)` edges of the occupied band, Hz.
    pub fn interval(&self) -> (f64, f64) {
        let half = self.bandwidth / 2.0;
        (self.center_freq - half, self.center_freq + half)
    }
}

/// All links currently configured on the transponder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub links: [LinkConfig; NUM_LINKS],
    pub transponder: TransponderSpec,
    pub step_count: u32,
}

impl EnvState {
    pub fn observe(&self) -> Observation {
        let total_bw = self.transponder.total_bandwidth();
        Observation {
            links: std::array::from_fn(|i| {
                let l = &self.links[i];
                LinkObservation {
                    center_freq_norm: l.center_freq_norm,
                    eirp_norm: l.eirp_norm,
                    modfec_index: l.modfec_index,
                    link_bandwidth_pct: l.bandwidth / total_bw,
                }
            }),
        }
    }

    /// Rebuilds the state an observation was taken from.
    pub fn from_observation(obs: &Observation, profile: &Profile, step_count: u32) -> Self {
        Self {
            links: std::array::from_fn(|i| {
                let o = &obs.links[i];
                LinkConfig::new(o.center_freq_norm, o.eirp_norm, o.modfec_index, profile)
            }),
            transponder: profile.transponder.clone(),
            step_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkObservation {
    pub center_freq_norm: f64,
    pub eirp_norm: f64,
    pub modfec_index: usize,
    /// Link bandwidth divided by transponder bandwidth.
    pub link_bandwidth_pct: f64,
}

/// Flat view of every link, identical for both action spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub links: [LinkObservation; NUM_LINKS],
}

impl Observation {
    /// Length of [`Observation::features`].
    pub const DIM: usize = 4 * NUM_LINKS;

    /// `(center, eirp, modfec, bandwidth_pct)` per link, in link order.
    pub fn features(&self) -> [f64; Self::DIM] {
        let mut out = [0.0; Self::DIM];
        for (chunk, l) in out.chunks_exact_mut(4).zip(&self.links) {
            chunk[0] = l.center_freq_norm;
            chunk[1] = l.eirp_norm;
            chunk[2] = l.modfec_index as f64;
            chunk[3] = l.link_bandwidth_pct;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn observation_reconstructs_state(
            c in proptest::array::uniform3(-0.5f64..1.5),
            e in proptest::array::uniform3(-0.5f64..1.5),
            k in proptest::array::uniform3(0usize..3),
            steps in 0u32..100,
        ) {
            let p = Profile::default();
            let state = EnvState {
                links: std::array::from_fn(|i| LinkConfig::new(c[i], e[i], k[i], &p)),
                transponder: p.transponder.clone(),
                step_count: steps,
            };
            let back = EnvState::from_observation(&state.observe(), &p, steps);
            prop_assert_eq!(back, state);
        }
    }

    #[test]
    fn interval_is_centered() {
        let p = Profile::default();
        let l = LinkConfig::from_physical(10e6, 5.0, 0, &p);
        let (lo, hi) = l.interval();
        assert_eq!(hi - lo, l.bandwidth());
        assert_eq!((lo + hi) / 2.0, 10e6);
    }
}
