//! Command-line front end: map generation, headless rollouts, throughput
//! measurement and the teleoperation server.

use std::path::Path;

use anyhow::Context;
use drivesim_core::env::{named_config, ScenarioConfig};

pub mod bench;
pub mod generate;
pub mod rollout;
pub mod serve;

pub use bench::{run_benchmark, with_traffic, BenchReport, Phases};
pub use generate::{generate, GenerateSummary};
pub use rollout::{rollout, Policy, RolloutOutput};
pub use serve::{serve, spawn_server, ServeOptions, ServerHandle};

/// Environment variable that overrides every `--seed` flag.
pub const SEED_VAR: &str = "DRIVESIM_SEED";

/// The seed to use: `DRIVESIM_SEED` when set, else the flag.
pub fn effective_seed(flag: u64) -> anyhow::Result<u64> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_VAR}={v:?} is not a seed")),
        Err(_) => Ok(flag),
    }
}

/// Load a scenario from a catalog name or a JSON config file.
pub fn load_config(env: Option<&str>, config: Option<&Path>) -> anyhow::Result<ScenarioConfig> {
    match (env, config) {
        (Some(name), None) => Ok(named_config(name)?),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
        }
        (None, None) => Ok(named_config("SingleAgentPG")?),
        (Some(_), Some(_)) => anyhow::bail!("--env and --config are exclusive"),
    }
}
