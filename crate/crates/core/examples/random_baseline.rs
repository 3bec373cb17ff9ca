//! Uniform random actions over many episodes, both action spaces.

use std::sync::Arc;

use transponder_core::random::{run_random, RandomParams};
use transponder_core::{ActionSpaceKind, Profile};

fn main() -> transponder_core::Result<()> {
    let profile = Arc::new(Profile::default());
    for space in [ActionSpaceKind::Space1, ActionSpaceKind::Space2] {
        for seed in 0..3 {
            let r = run_random(profile.clone(), &RandomParams { space, episodes: 1000, seed })?;
            println!("{space} seed {seed}: final reward {:.4} +- {:.4}", r.mean, r.std);
        }
    }
    Ok(())
}
