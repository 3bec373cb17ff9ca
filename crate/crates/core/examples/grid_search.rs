//! Learning-rate grid search on a small budget.

use transponder_core::harness::{grid_search, write_grid, ExperimentSpec};
use transponder_core::ppo::PpoConfig;
use transponder_core::Profile;

fn main() -> transponder_core::Result<()> {
    let spec = ExperimentSpec {
        total_steps: 10_000,
        inference_episodes: 20,
        ppo: PpoConfig { hidden: vec![64, 64], sgd_epochs: 10, ..PpoConfig::default() },
        ..ExperimentSpec::experiment1()
    };
    let result = grid_search(&Profile::default(), &spec, &[1e-3, 1e-4, 1e-5], &[0, 1])?;
    for r in &result.rows {
        println!("lr {:e}: {:.4} +- {:.4}", r.learning_rate, r.mean, r.std);
    }
    println!("winner {:e}", result.winner);
    write_grid(std::path::Path::new("grid_out"), &result)?;
    Ok(())
}
