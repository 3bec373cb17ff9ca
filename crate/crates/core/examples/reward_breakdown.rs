//! Scores one configuration under two weightings and prints every partial.

use transponder_core::rewards::total_reward;
use transponder_core::{EnvState, LinkConfig, MetricValues, MetricWeights, Profile};

fn print(label: &str, state: &EnvState, profile: &Profile, weights: &MetricWeights) {
    let b = total_reward(state, profile, weights);
    println!("{label}: total {:.4}", b.total);
    for (name, v) in MetricValues::NAMES.iter().zip(b.metric_values().to_array()) {
        println!("  {name:<15} {v:.3}");
    }
}

fn main() {
    let profile = Profile::default();
    // link 1 overlaps link 0; link 2 is underpowered
    let links = [
        LinkConfig::new(0.30, 0.15, 0, &profile),
        LinkConfig::new(0.32, 0.15, 0, &profile),
        LinkConfig::new(0.80, 0.01, 2, &profile),
    ];
    let state = EnvState { links, transponder: profile.transponder.clone(), step_count: 0 };
    print("unit weights", &state, &profile, &MetricWeights::default());
    let overlap_heavy = MetricWeights { overlap: 5.0, ..MetricWeights::default() };
    print("overlap weighted x5", &state, &profile, &overlap_heavy);
}
