//! Link configuration on a satellite transponder as a reward-maximization
//! problem.
//!
//! The crate is organised around one seedable environment and three
//! optimizers that share it:
//!
//! - [`env`]: transponder model, the two action spaces, observations and the
//!   step/reset protocol.
//! - [`rewards`]: the eight condition metrics and their weighted total.
//! - [`sa`]: simulated annealing over full configurations.
//! - [`ppo`]: actor-critic PPO with hybrid continuous/categorical heads.
//! - [`random`]: the uniform random-action baseline.
//! - [`harness`]: multi-seed comparisons, learning-rate grid search and
//!   result tables.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod env;
pub mod error;
pub mod harness;
pub mod ppo;
pub mod profile;
pub mod random;
pub mod rewards;
pub mod sa;
pub mod trace;

pub use env::{
    ActionSpace1, ActionSpace2, ActionSpaceKind, EnvState, LinkConfig, LinkDemand, ModFec,
    Observation, StepOutcome, TransponderEnv, TransponderSpec,
};
pub use error::{Error, Result};
pub use profile::Profile;
pub use rewards::{MetricValues, MetricWeights, RewardBreakdown};
pub use trace::{RunTrace, TraceMeta, TracePoint};
