//! The eight condition metrics and their weighted total.
//!
//! Link metrics (overlap, on-transponder, PEB, margin) are scored per link and
//! share `link_share` of the total; transponder metrics (bandwidth, EIRP,
//! packed, free resource) share `transponder_share`. Inside each group the
//! weights are normalized by their sum, so the total is 1 exactly when every
//! raw indicator is 1.

use serde::{Deserialize, Serialize};

use crate::env::{EnvState, LinkConfig, LinkDemand, ModFec, TransponderSpec, NUM_LINKS};
use crate::error::{config_err, Result};
use crate::profile::Profile;

/// Per-metric weights and the link/transponder split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub overlap: f64,
    pub on_transponder: f64,
    pub peb: f64,
    pub margin: f64,
    pub bandwidth: f64,
    pub eirp: f64,
    pub packed: f64,
    pub free_resource: f64,
    pub link_share: f64,
    pub transponder_share: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            overlap: 1.0,
            on_transponder: 1.0,
            peb: 1.0,
            margin: 1.0,
            bandwidth: 1.0,
            eirp: 1.0,
            packed: 1.0,
            free_resource: 1.0,
            link_share: 0.7,
            transponder_share: 0.3,
        }
    }
}

impl MetricWeights {
    pub fn link_sum(&self) -> f64 {
        self.overlap + self.on_transponder + self.peb + self.margin
    }

    pub fn transponder_sum(&self) -> f64 {
        self.bandwidth + self.eirp + self.packed + self.free_resource
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("overlap", self.overlap),
            ("on_transponder", self.on_transponder),
            ("peb", self.peb),
            ("margin", self.margin),
            ("bandwidth", self.bandwidth),
            ("eirp", self.eirp),
            ("packed", self.packed),
            ("free_resource", self.free_resource),
            ("link_share", self.link_share),
            ("transponder_share", self.transponder_share),
        ];
        for (name, w) in all {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(config_err(format!("weight '{name}' must be a non-negative number (got {w})")));
            }
        }
        if !(self.link_sum() > 0.0) {
            return Err(config_err("at least one link metric weight must be positive"));
        }
        if !(self.transponder_sum() > 0.0) {
            return Err(config_err("at least one transponder metric weight must be positive"));
        }
        if (self.link_share + self.transponder_share - 1.0).abs() > 1e-9 {
            return Err(config_err(format!(
                "link_share + transponder_share must be 1 (got {} + {})",
                self.link_share, self.transponder_share
            )));
        }
        Ok(())
    }
}

/// Link-level metric values, raw (`[0, 1]`) or weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    pub overlap: f64,
    pub on_transponder: f64,
    pub peb: f64,
    pub margin: f64,
}

/// Transponder-level metric values, raw (`[0, 1]`) or weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransponderMetrics {
    pub bandwidth: f64,
    pub eirp: f64,
    pub packed: f64,
    pub free_resource: f64,
}

/// Unweighted indicators for every link and the transponder.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RawIndicators {
    pub links: [LinkMetrics; NUM_LINKS],
    pub transponder: TransponderMetrics,
}

/// The eight metrics as one flat record; link metrics averaged over links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub overlap: f64,
    pub on_transponder: f64,
    pub peb: f64,
    pub margin: f64,
    pub bandwidth: f64,
    pub eirp: f64,
    pub packed: f64,
    pub free_resource: f64,
}

impl MetricValues {
    pub const NAMES: [&'static str; 8] =
        ["overlap", "on_transponder", "peb", "margin", "bandwidth", "eirp", "packed", "free_resource"];

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.overlap,
            self.on_transponder,
            self.peb,
            self.margin,
            self.bandwidth,
            self.eirp,
            self.packed,
            self.free_resource,
        ]
    }

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            overlap: a[0],
            on_transponder: a[1],
            peb: a[2],
            margin: a[3],
            bandwidth: a[4],
            eirp: a[5],
            packed: a[6],
            free_resource: a[7],
        }
    }

    /// Component-wise mean; zero for an empty input.
    pub fn mean<'a>(values: impl IntoIterator<Item = &'a MetricValues>) -> MetricValues {
        let mut acc = [0.0; 8];
        let mut n = 0usize;
        for v in values {
            for (a, x) in acc.iter_mut().zip(v.to_array()) {
                *a += x;
            }
            n += 1;
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        Self::from_array(acc)
    }
}

impl RawIndicators {
    pub fn metric_values(&self) -> MetricValues {
        let n = NUM_LINKS as f64;
        let sum = |f: fn(&LinkMetrics) -> f64| self.links.iter().map(f).sum::<f64>() / n;
        MetricValues {
            overlap: sum(|l| l.overlap),
            on_transponder: sum(|l| l.on_transponder),
            peb: sum(|l| l.peb),
            margin: sum(|l| l.margin),
            bandwidth: self.transponder.bandwidth,
            eirp: self.transponder.eirp,
            packed: self.transponder.packed,
            free_resource: self.transponder.free_resource,
        }
    }
}

/// Weighted partial rewards and their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    /// Weighted partials per link.
    pub links: [LinkMetrics; NUM_LINKS],
    /// Weighted transponder partials.
    pub transponder: TransponderMetrics,
    /// Total reward in `[0, 1]`.
    pub total: f64,
    pub raw: RawIndicators,
}

impl RewardBreakdown {
    /// Sum of every weighted partial; equals `total` up to rounding.
    pub fn sum_of_partials(&self) -> f64 {
        let links: f64 = self.links.iter().map(|l| l.overlap + l.on_transponder + l.peb + l.margin).sum();
        let t = &self.transponder;
        links + t.bandwidth + t.eirp + t.packed + t.free_resource
    }

    pub fn metric_values(&self) -> MetricValues {
        self.raw.metric_values()
    }
}

/// Half-open `[lo, hi)` intersection test; touching edges do not overlap.
pub fn intervals_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

fn overlap_width(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// 1 iff `link` intersects none of `others`.
pub fn overlap_indicator<'a>(link: &LinkConfig, others: impl IntoIterator<Item = &'a LinkConfig>) -> f64 {
    let iv = link.interval();
    if others.into_iter().any(|o| intervals_overlap(iv, o.interval())) {
        0.0
    } else {
        1.0
    }
}

/// 1 iff the closed band of the link lies inside the transponder band.
pub fn on_transponder_indicator(link: &LinkConfig, spec: &TransponderSpec) -> f64 {
    let (lo, hi) = link.interval();
    if lo >= spec.freq_lo && hi <= spec.freq_hi {
        1.0
    } else {
        0.0
    }
}

/// 1 at exactly the minimum EIRP, 0 below it, decaying linearly to 0 at
/// twice the minimum.
pub fn margin_reward(link: &LinkConfig, demand: &LinkDemand, modfec: &ModFec) -> Result<f64> {
    let min_required = demand.min_required_eirp(modfec);
    if !(min_required > 0.0) {
        return Err(config_err(format!("minimum required EIRP must be positive (got {min_required})")));
    }
    Ok(margin_score(link.eirp(), min_required))
}

fn margin_score(eirp: f64, min_required: f64) -> f64 {
    if eirp < min_required {
        0.0
    } else {
        (1.0 - (eirp - min_required) / min_required).max(0.0)
    }
}

/// 1 iff the link's power share over its bandwidth share lies in
/// `[1 / ratio_max, ratio_max]`. Zero-bandwidth links score 0.
pub fn peb_indicator(link: &LinkConfig, spec: &TransponderSpec, ratio_max: f64) -> f64 {
    if !(link.bandwidth() > 0.0) {
        return 0.0;
    }
    let power_share = link.eirp() / spec.total_eirp;
    let bandwidth_share = link.bandwidth() / spec.total_bandwidth();
    let ratio = power_share / bandwidth_share;
    if ratio >= 1.0 / ratio_max && ratio <= ratio_max {
        1.0
    } else {
        0.0
    }
}

/// Packing score in `[0, 1]`: the overlap-free fraction of the summed link
/// bandwidth times how densely the union of links fills the span between the
/// outermost edges. Disjoint, edge-to-edge links score 1.
pub fn packing_score(links: &[LinkConfig]) -> f64 {
    let intervals: Vec<(f64, f64)> = links.iter().map(LinkConfig::interval).collect();
    let total_bw: f64 = links.iter().map(LinkConfig::bandwidth).sum();
    if !(total_bw > 0.0) {
        return 0.0;
    }
    let mut pairwise = 0.0;
    for (i, a) in intervals.iter().enumerate() {
        for b in &intervals[i + 1..] {
            pairwise += overlap_width(*a, *b);
        }
    }
    let overlap_free = (1.0 - pairwise / total_bw).clamp(0.0, 1.0);

    let mut sorted = intervals.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut union = 0.0;
    let (mut cur_lo, mut cur_hi) = sorted[0];
    for &(lo, hi) in &sorted[1..] {
        if lo > cur_hi {
            union += cur_hi - cur_lo;
            cur_lo = lo;
            cur_hi = hi;
        } else {
            cur_hi = cur_hi.max(hi);
        }
    }
    union += cur_hi - cur_lo;
    let span = sorted.iter().map(|iv| iv.1).fold(f64::NEG_INFINITY, f64::max) - sorted[0].0;
    let density = if span > 0.0 { (union / span).clamp(0.0, 1.0) } else { 0.0 };
    overlap_free * density
}

/// Bandwidth, EIRP, packed and free-resource indicators.
pub fn transponder_indicators(state: &EnvState) -> TransponderMetrics {
    let spec = &state.transponder;
    let total_bw: f64 = state.links.iter().map(LinkConfig::bandwidth).sum();
    let total_eirp: f64 = state.links.iter().map(LinkConfig::eirp).sum();
    let all_on = state.links.iter().all(|l| on_transponder_indicator(l, spec) == 1.0);
    TransponderMetrics {
        bandwidth: if total_bw <= spec.total_bandwidth() { 1.0 } else { 0.0 },
        eirp: if total_eirp <= spec.total_eirp { 1.0 } else { 0.0 },
        packed: packing_score(&state.links),
        free_resource: if all_on { (1.0 - total_bw / spec.total_bandwidth()).max(0.0) } else { 0.0 },
    }
}

/// Raw indicators of a state.
pub fn raw_indicators(state: &EnvState, profile: &Profile) -> RawIndicators {
    let spec = &state.transponder;
    let links = std::array::from_fn(|i| {
        let link = &state.links[i];
        let others = state.links.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l);
        let min_required = profile.demand.min_required_eirp(&profile.modfec[link.modfec_index()]);
        LinkMetrics {
            overlap: overlap_indicator(link, others),
            on_transponder: on_transponder_indicator(link, spec),
            peb: peb_indicator(link, spec, profile.rewards.peb_ratio_max),
            margin: margin_score(link.eirp(), min_required),
        }
    });
    RawIndicators { links, transponder: transponder_indicators(state) }
}

/// Applies weights to raw indicators.
///
/// The total is computed from the group ratios `sum(w * x) / sum(w)` so that it
/// hits exactly `link_share`, `transponder_share` or 1 at the extremes; the
/// per-metric partials are reported alongside and sum to the same value.
pub fn weigh(raw: &RawIndicators, weights: &MetricWeights) -> RewardBreakdown {
    let n = NUM_LINKS as f64;
    let link_norm = weights.link_sum() * n;
    let per_link = weights.link_share / link_norm;
    let per_tp = weights.transponder_share / weights.transponder_sum();

    let mut link_weighted_sum = 0.0;
    let links = std::array::from_fn(|i| {
        let r = &raw.links[i];
        let w = LinkMetrics {
            overlap: weights.overlap * r.overlap,
            on_transponder: weights.on_transponder * r.on_transponder,
            peb: weights.peb * r.peb,
            margin: weights.margin * r.margin,
        };
        link_weighted_sum += w.overlap + w.on_transponder + w.peb + w.margin;
        LinkMetrics {
            overlap: per_link * w.overlap,
            on_transponder: per_link * w.on_transponder,
            peb: per_link * w.peb,
            margin: per_link * w.margin,
        }
    });
    let t = &raw.transponder;
    let tw = TransponderMetrics {
        bandwidth: weights.bandwidth * t.bandwidth,
        eirp: weights.eirp * t.eirp,
        packed: weights.packed * t.packed,
        free_resource: weights.free_resource * t.free_resource,
    };
    let tp_weighted_sum = tw.bandwidth + tw.eirp + tw.packed + tw.free_resource;
    let transponder = TransponderMetrics {
        bandwidth: per_tp * tw.bandwidth,
        eirp: per_tp * tw.eirp,
        packed: per_tp * tw.packed,
        free_resource: per_tp * tw.free_resource,
    };
    let total = weights.link_share * (link_weighted_sum / link_norm)
        + weights.transponder_share * (tp_weighted_sum / weights.transponder_sum());
    RewardBreakdown { links, transponder, total: total.clamp(0.0, 1.0), raw: *raw }
}

/// Total reward of a state with its full breakdown.
pub fn total_reward(state: &EnvState, profile: &Profile, weights: &MetricWeights) -> RewardBreakdown {
    weigh(&raw_indicators(state, profile), weights)
}
