//! Fixtures shared by the criterion benches.

use drivesim_core::engine::{TrafficConfig, RECYCLE_RADIUS};
use drivesim_core::env::{named_config, Env, ScenarioConfig};

/// Single-agent procedural scene with exactly `traffic` rule-based cars.
pub fn single_agent(traffic: usize) -> ScenarioConfig {
    ScenarioConfig {
        traffic: Some(TrafficConfig {
            fixed_count: Some(traffic),
            recycle_radius: Some(RECYCLE_RADIUS),
            ..TrafficConfig::default()
        }),
        ..named_config("SingleAgentPG").expect("catalog entry")
    }
}

/// Environment reset and ready to step.
pub fn ready_env(config: ScenarioConfig, seed: u64) -> Env {
    let mut env = Env::new(config).expect("valid config");
    env.reset(seed).expect("reset");
    env
}

/// One decision step with the built-in driver, resetting when done.
pub fn drive(env: &mut Env, seed: &mut u64) {
    if env.is_done() {
        *seed += 1;
        env.reset(*seed).expect("reset");
    }
    let actions = env.expert_actions();
    env.step(&actions).expect("step");
}
