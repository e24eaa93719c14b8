use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::reward::TerminationReason;
use super::{Env, EnvError};
use crate::dynamics::Action;

/// One finished agent episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub agent: String,
    pub reason: TerminationReason,
    pub reward: f64,
    pub cost: f64,
    pub steps: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episodes: usize,
    pub success_rate: f64,
    /// Share of episodes ended by leaving the road or breaking a rule.
    pub rule_violation_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_reward: f64,
    pub mean_cost: f64,
}

impl Metrics {
    pub fn from_records(records: &[EpisodeRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return Self::default();
        }
        let share = |f: &dyn Fn(TerminationReason) -> bool| records.iter().filter(|r| f(r.reason)).count() as f64 / n as f64;
        Self {
            episodes: n,
            success_rate: share(&|r| r == TerminationReason::Success),
            rule_violation_rate: share(&|r| r == TerminationReason::OutOfRoad),
            crash_rate: share(&|r| r.is_crash()),
            timeout_rate: share(&|r| r == TerminationReason::Horizon || r == TerminationReason::None),
            mean_reward: records.iter().map(|r| r.reward).sum::<f64>() / n as f64,
            mean_cost: records.iter().map(|r| r.cost).sum::<f64>() / n as f64,
        }
    }
}

/// Run one episode per seed with `policy` choosing each agent's action.
/// Every agent episode (including respawned agents) is one record.
pub fn evaluate<P>(config: &ScenarioConfig, seeds: Range<u64>, mut policy: P) -> Result<(Metrics, Vec<EpisodeRecord>), EnvError>
where
    P: FnMut(&Env, &str) -> Action,
{
    let mut env = Env::new(config.clone())?;
    let mut records = Vec::new();
    for seed in seeds {
        env.reset(seed)?;
        let mut open: std::collections::BTreeMap<String, EpisodeRecord> = env
            .agent_names()
            .into_iter()
            .map(|a| (a.clone(), blank(seed, a)))
            .collect();
        loop {
            let actions = env.agent_names().into_iter().map(|n| {
                let a = policy(&env, &n);
                (n, a)
            });
            let actions = actions.collect();
            let res = env.step(&actions)?;
            for (name, o) in &res.outcomes {
                let r = open.entry(name.clone()).or_insert_with(|| blank(seed, name.clone()));
                r.reward += o.reward;
                r.cost += o.cost;
                r.steps += 1;
                if o.terminated {
                    r.reason = o.reason;
                    records.push(open.remove(name).expect("open record"));
                }
            }
            for name in res.new_agents.keys() {
                open.insert(name.clone(), blank(seed, name.clone()));
            }
            if res.done {
                break;
            }
        }
        // agents cut off by the episode end count as timeouts
        records.extend(open.into_values().map(|mut r| {
            r.reason = TerminationReason::Horizon;
            r
        }));
    }
    Ok((Metrics::from_records(&records), records))
}

fn blank(seed: u64, agent: String) -> EpisodeRecord {
    EpisodeRecord {
        seed,
        agent,
        reason: TerminationReason::None,
        reward: 0.0,
        cost: 0.0,
        steps: 0,
    }
}
