use std::time::{Duration, Instant};

use drivesim_core::engine::TrafficConfig;
use drivesim_core::env::{Env, ScenarioConfig};
use serde::Serialize;

/// Seconds spent per phase over the whole run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Phases {
    pub engine: f64,
    pub sensing: f64,
    pub reward: f64,
    /// Built-in driver choosing the agents' actions.
    pub policy: f64,
    pub reset: f64,
    /// Frame serialization and network I/O; always zero here.
    pub streaming: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub steps: u64,
    pub episodes: u64,
    pub agents_mean: f64,
    pub seconds: f64,
    pub steps_per_second: f64,
    pub phases: Phases,
}

/// Give the config exactly `n` rule-based traffic vehicles.
pub fn with_traffic(mut config: ScenarioConfig, n: usize) -> ScenarioConfig {
    let mut t = config.traffic.take().unwrap_or(TrafficConfig {
        recycle_radius: Some(drivesim_core::engine::RECYCLE_RADIUS),
        ..TrafficConfig::default()
    });
    t.fixed_count = Some(n);
    config.traffic = Some(t);
    config.replay_traffic = false;
    config
}

/// Step the environment `steps` times with every agent on the built-in
/// driver, resetting with the next seed whenever an episode ends.
pub fn run_benchmark(config: &ScenarioConfig, steps: u64, seed: u64) -> anyhow::Result<BenchReport> {
    anyhow::ensure!(steps > 0, "steps must be at least 1");
    let mut env = Env::new(config.clone())?;
    let mut phases = Phases::default();
    let mut policy = Duration::ZERO;
    let mut reset = Duration::ZERO;
    let mut episodes = 1;
    let mut agent_steps = 0usize;

    let start = Instant::now();
    let t = Instant::now();
    env.reset(seed)?;
    reset += t.elapsed();
    for _ in 0..steps {
        if env.is_done() {
            let t = Instant::now();
            env.reset(seed + episodes)?;
            reset += t.elapsed();
            episodes += 1;
        }
        let t = Instant::now();
        let actions = env.expert_actions();
        policy += t.elapsed();
        agent_steps += actions.len();
        env.step(&actions)?;
    }
    let seconds = start.elapsed().as_secs_f64();
    let times = env.phase_times();
    phases.engine = times.engine.as_secs_f64();
    phases.sensing = times.sensing.as_secs_f64();
    phases.reward = times.reward.as_secs_f64();
    phases.policy = policy.as_secs_f64();
    phases.reset = reset.as_secs_f64();
    Ok(BenchReport {
        steps,
        episodes,
        agents_mean: agent_steps as f64 / steps as f64,
        seconds,
        steps_per_second: steps as f64 / seconds,
        phases,
    })
}
