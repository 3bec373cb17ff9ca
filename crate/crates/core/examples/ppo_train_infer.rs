//! Trains PPO on space 1, saves a checkpoint, reloads it and runs inference.
//!
//! `cargo run --release --example ppo_train_infer -- [total_steps]`
//! The default 20k steps take well under a minute; 200k show clear learning.

use std::sync::Arc;

use transponder_core::ppo::{inference, Checkpoint, InferenceMode, PpoConfig, PpoTrainer};
use transponder_core::{ActionSpaceKind, Profile};

fn main() -> transponder_core::Result<()> {
    let total_steps = std::env::args().nth(1).map_or(20_000, |s| s.parse().expect("total_steps is an integer"));
    let profile = Arc::new(Profile::default());
    let config = PpoConfig { total_steps, learning_rate: 1e-5, ..PpoConfig::default() };
    let mut trainer = PpoTrainer::new(profile.clone(), ActionSpaceKind::Space1, config)?;
    trainer.run(|r| {
        println!(
            "step {:>7}  final {:.4}  overlap {:.2}  margin {:.2}  entropy {:.3}",
            r.env_steps, r.batch.mean_final_reward, r.batch.metrics.overlap, r.batch.metrics.margin, r.loss.entropy
        )
    })?;

    let path = std::env::temp_dir().join("transponder_example_checkpoint.json");
    trainer.checkpoint().save(&path)?;
    let net = Checkpoint::load(&path)?.net()?;
    assert_eq!(&net, trainer.net());

    for mode in [InferenceMode::Deterministic, InferenceMode::Stochastic] {
        let r = inference(&net, profile.clone(), ActionSpaceKind::Space1, 100, 0, mode)?;
        println!("{mode:?} inference: {:.4} +- {:.4}", r.mean, r.std);
    }
    println!("checkpoint at {}", path.display());
    Ok(())
}
