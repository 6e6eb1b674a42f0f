//! The fixed-tick simulation engine: configuration, the per-tick loop
//! coordinating both players, and metrics collection.

mod config;
mod metrics;
mod sim;

pub use config::{ConfigError, ScenarioSpec, SimConfig, SimParams};
pub use metrics::{MetricsTrace, Summary, TickRecord};
pub use sim::{run, SimError, SimState};
