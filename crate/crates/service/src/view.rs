//! What the console draws for one recorded configuration.

use serde::{Deserialize, Serialize};
use transponder_core::rewards::total_reward;
use transponder_core::{EnvState, Profile, RewardBreakdown};

/// Upper end of the consumption gauges, percent.
pub const GAUGE_LIMIT_PCT: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkView {
    /// `(lo, hi)` occupied band, Hz.
    pub interval: (f64, f64),
    pub center_freq: f64,
    pub bandwidth: f64,
    pub eirp: f64,
    pub modfec_index: usize,
    /// EIRP meets the minimum required for the link's MOD-FEC.
    pub margin_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gauges {
    pub bandwidth_consumption_pct: f64,
    pub power_consumption_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransponderStateView {
    pub links: Vec<LinkView>,
    pub gauges: Gauges,
    /// Reward of this configuration under the run's weights.
    pub breakdown: RewardBreakdown,
}

fn gauge(used: f64, available: f64) -> f64 {
    (used / available * 100.0).min(GAUGE_LIMIT_PCT)
}

impl TransponderStateView {
    pub fn new(state: &EnvState, profile: &Profile) -> Self {
        let links: Vec<LinkView> = state
            .links
            .iter()
            .map(|l| LinkView {
                interval: l.interval(),
                center_freq: l.center_freq(),
                bandwidth: l.bandwidth(),
                eirp: l.eirp(),
                modfec_index: l.modfec_index(),
                margin_ok: l.eirp() >= profile.demand.min_required_eirp(&profile.modfec[l.modfec_index()]),
            })
            .collect();
        let gauges = Gauges {
            bandwidth_consumption_pct: gauge(links.iter().map(|l| l.bandwidth).sum(), state.transponder.total_bandwidth()),
            power_consumption_pct: gauge(links.iter().map(|l| l.eirp).sum(), state.transponder.total_eirp),
        };
        Self { links, gauges, breakdown: total_reward(state, profile, &profile.weights) }
    }
}
