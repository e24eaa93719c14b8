use std::path::{Path, PathBuf};
use std::str::FromStr;

use drivesim_core::dynamics::Action;
use drivesim_core::env::{evaluate, EpisodeRecord, Metrics, ScenarioConfig};
use drivesim_core::scenario_io::{replay_demo, DemoRecord};

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    /// The built-in rule-based driver.
    Idm,
    Zero,
    /// Actions taken from a recorded demonstration.
    ReplayDemo(PathBuf),
}

impl Policy {
    pub fn parse(name: &str, demo: Option<&Path>) -> anyhow::Result<Self> {
        match name {
            "idm" => Ok(Policy::Idm),
            "zero" => Ok(Policy::Zero),
            "replay-demo" => match demo {
                Some(p) => Ok(Policy::ReplayDemo(p.to_path_buf())),
                None => anyhow::bail!("--policy replay-demo needs --demo FILE"),
            },
            other => anyhow::bail!("unknown policy {other:?} (expected idm, zero or replay-demo)"),
        }
    }
}

impl FromStr for Policy {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::parse(s, None)
    }
}

#[derive(Clone, Debug)]
pub struct RolloutOutput {
    pub records: Vec<EpisodeRecord>,
    pub metrics: Metrics,
}

impl RolloutOutput {
    /// One JSON object per episode, then the summary line.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.records.iter().map(|r| serde_json::to_string(r).expect("serializable")).collect();
        out.push(serde_json::json!({ "summary": self.metrics }).to_string());
        out
    }
}

/// Run `episodes` consecutive seeds from `seed`. A demo replay ignores
/// both and uses the recording's own config and seed.
pub fn rollout(config: &ScenarioConfig, policy: &Policy, episodes: u64, seed: u64) -> anyhow::Result<RolloutOutput> {
    let (metrics, records) = match policy {
        Policy::Idm => evaluate(config, seed..seed + episodes, |env, n| env.expert_action(n).unwrap_or(Action::ZERO))?,
        Policy::Zero => evaluate(config, seed..seed + episodes, |_, _| Action::ZERO)?,
        Policy::ReplayDemo(path) => {
            let demo = DemoRecord::load(path)?;
            let report = replay_demo(&demo)?;
            let records: Vec<EpisodeRecord> = report
                .episodes
                .iter()
                .map(|(agent, reason, reward, cost)| EpisodeRecord {
                    seed: demo.header.seed,
                    agent: agent.clone(),
                    reason: *reason,
                    reward: *reward,
                    cost: *cost,
                    steps: demo.steps.iter().filter(|s| s.outcomes.contains_key(agent)).count() as u64,
                })
                .collect();
            (Metrics::from_records(&records), records)
        }
    };
    Ok(RolloutOutput { records, metrics })
}
