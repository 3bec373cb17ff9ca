//! Random, SA and PPO on a reduced budget, with the same outputs as the
//! `compare` subcommand.
//!
//! `cargo run --release --example compare -- [out_dir]`

use std::path::PathBuf;

use transponder_core::harness::{run_comparison, ExperimentSpec};
use transponder_core::ppo::PpoConfig;
use transponder_core::Profile;

fn main() -> transponder_core::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "compare_out".into()));
    let spec = ExperimentSpec {
        total_steps: 20_000,
        seeds: vec![0, 1, 2],
        inference_episodes: 50,
        ppo: PpoConfig { hidden: vec![64, 64], ..PpoConfig::default() },
        ..ExperimentSpec::experiment1()
    };
    let result = run_comparison(&Profile::default(), &spec, Some(&out))?;
    for row in &result.table {
        println!("{:<7} {} {:.4} +- {:.4} ({} seeds)", row.algorithm, row.environment, row.mean, row.std, row.seeds);
    }
    println!("tables and traces in {}", out.display());
    Ok(())
}
