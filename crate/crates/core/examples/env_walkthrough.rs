//! Steps both action spaces by hand and prints what the environment sees.

use std::sync::Arc;

use transponder_core::env::{compute_bandwidth, LinkAction, LinkParam};
use transponder_core::{ActionSpace1, ActionSpace2, ActionSpaceKind, Profile, TransponderEnv};

fn main() -> transponder_core::Result<()> {
    let profile = Arc::new(Profile::default());
    for (i, m) in profile.modfec.iter().enumerate() {
        println!(
            "modfec {i} ({}): bandwidth {:.2} MHz, minimum EIRP {:.2} W",
            m.name,
            compute_bandwidth(&profile.demand, m) / 1e6,
            profile.demand.min_required_eirp(m)
        );
    }

    let mut env = TransponderEnv::new(profile.clone(), ActionSpaceKind::Space1)?;
    let obs = env.reset(Some(0));
    println!("\nreset observation: {:?}", obs.features());

    // three links side by side from the lower band edge, each at its minimum power
    let m = &profile.modfec[0];
    let bw = compute_bandwidth(&profile.demand, m);
    let span = profile.transponder.total_bandwidth();
    let eirp_norm = profile.demand.min_required_eirp(m) / profile.link_eirp_max;
    let packed = ActionSpace1 {
        links: std::array::from_fn(|i| LinkAction {
            center_freq_norm: (bw / 2.0 + i as f64 * bw) / span,
            eirp_norm,
            modfec_index: 0,
        }),
    };
    let out = env.step_space1(&packed);
    println!("packed configuration: reward {:.4}", out.reward);
    println!("metrics: {:?}", out.breakdown.metric_values());

    let mut env2 = TransponderEnv::new(profile, ActionSpaceKind::Space2)?;
    env2.reset(Some(0));
    let edit = ActionSpace2 { link_index: 1, param: LinkParam::Eirp, continuous_value: 0.05, discrete_value: 0 };
    let before = env2.state().links[1].eirp();
    let out = env2.step_space2(&edit);
    println!(
        "\nspace 2 edit of link 1 EIRP: {before:.2} W -> {:.2} W, reward {:.4}, {} of {} steps",
        env2.state().links[1].eirp(),
        out.reward,
        env2.state().step_count,
        env2.episode_length()
    );
    Ok(())
}
