//! Local HTTP service and command-line front end for the transponder
//! optimizers.
//!
//! The service is a view/controller over `transponder-core`: runs execute on
//! blocking workers, record `(step, reward, configuration)` points, and every
//! state view is recomputed from those points with the core reward code.

pub mod api;
pub mod cli;
pub mod error;
pub mod runs;
pub mod view;

pub use api::router;
pub use error::ApiError;
pub use runs::{Registry, RunHandle, RunKind, RunStatus};
pub use view::TransponderStateView;

/// Environment variable holding the address `serve` binds to.
pub const BIND_ENV: &str = "TRANSPONDER_BIND";

/// Used when [`BIND_ENV`] is unset: local connections only.
pub const DEFAULT_BIND: &str = "127.0.0.1";
