//! One annealing run; writes its trace to `sa_trace.csv`.
//!
//! `cargo run --release --example simulated_annealing -- [seed] [max_steps]`

use std::sync::Arc;

use transponder_core::sa::{sa_run, SaParams};
use transponder_core::{ActionSpaceKind, Profile, TransponderEnv};

fn main() -> transponder_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map_or(0, |s| s.parse().expect("seed is an integer"));
    let max_steps = args.next().map_or(50_000, |s| s.parse().expect("max_steps is an integer"));
    let params = SaParams { seed, max_steps, ..SaParams::default() };

    let mut env = TransponderEnv::new(Arc::new(Profile::default()), ActionSpaceKind::Space1)?;
    let r = sa_run(&mut env, &params)?;
    let best = r.trace.extra_series("best_reward").expect("sa traces have best_reward");
    for checkpoint in [1_000, 5_000, 20_000, 50_000] {
        if checkpoint <= best.len() {
            println!("after {checkpoint:>6} evaluations: best {:.4}", best[checkpoint - 1]);
        }
    }
    println!("best configuration: {:?}", r.best_action);
    r.trace.save_csv("sa_trace.csv")?;
    println!("wrote sa_trace.csv");
    Ok(())
}
