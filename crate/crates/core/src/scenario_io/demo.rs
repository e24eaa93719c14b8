use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Action;
use crate::env::{Env, EnvError, ScenarioConfig, StepResult, TerminationReason};

pub const DEMO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("malformed demo: {0}")]
    Format(String),
    #[error("replay mismatch at step {step}, agent {agent}: {field}")]
    Mismatch { step: u64, agent: String, field: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// First line of a demo file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoHeader {
    pub version: u32,
    pub seed: u64,
    pub config: ScenarioConfig,
    /// Scenario document the map came from, if any.
    #[serde(default)]
    pub scenario: Option<String>,
    pub initial_observations: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub reason: TerminationReason,
}

/// One decision step: the actions fed in and what came out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoStep {
    pub step: u64,
    pub actions: BTreeMap<String, Action>,
    pub outcomes: BTreeMap<String, DemoOutcome>,
    #[serde(default)]
    pub new_agents: BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRecord {
    pub header: DemoHeader,
    pub steps: Vec<DemoStep>,
}

impl DemoStep {
    pub fn from_result(actions: &BTreeMap<String, Action>, res: &StepResult) -> Self {
        let step = res.outcomes.values().next().map(|o| o.info.step).unwrap_or(res.transition.step);
        Self {
            step,
            actions: actions.clone(),
            outcomes: res
                .outcomes
                .iter()
                .map(|(n, o)| {
                    (
                        n.clone(),
                        DemoOutcome {
                            observation: o.observation.clone(),
                            reward: o.reward,
                            cost: o.cost,
                            reason: o.reason,
                        },
                    )
                })
                .collect(),
            new_agents: res.new_agents.clone(),
        }
    }
}

impl DemoRecord {
    /// Empty record for an episode that was just reset.
    pub fn start(config: &ScenarioConfig, seed: u64, initial_observations: BTreeMap<String, Vec<f64>>) -> Self {
        Self {
            header: DemoHeader {
                version: DEMO_VERSION,
                seed,
                config: config.clone(),
                scenario: None,
                initial_observations,
            },
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, actions: &BTreeMap<String, Action>, res: &StepResult) {
        self.steps.push(DemoStep::from_result(actions, res));
    }

    /// Newline-delimited JSON: the header, then one line per step.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self, DemoError> {
        let mut lines = r.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, first) = lines.next().ok_or_else(|| DemoError::Format("missing header".into()))?;
        let header: DemoHeader = serde_json::from_str(&first?).map_err(|e| DemoError::Parse { line: 1, source: e })?;
        if header.version != DEMO_VERSION {
            return Err(DemoError::Format(format!("unsupported version {}", header.version)));
        }
        let mut steps = Vec::new();
        for (i, line) in lines {
            let s = serde_json::from_str(&line?).map_err(|e| DemoError::Parse { line: i + 1, source: e })?;
            steps.push(s);
        }
        Ok(Self { header, steps })
    }

    pub fn save(&self, path: &Path) -> Result<(), DemoError> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_ndjson(f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DemoError> {
        Self::read_ndjson(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Run `policy` from `reset(seed)` until the episode ends or `max_steps`
/// decisions have been made, recording every step.
pub fn record_demo<P>(config: &ScenarioConfig, seed: u64, max_steps: usize, mut policy: P) -> Result<DemoRecord, DemoError>
where
    P: FnMut(&Env, &str) -> Action,
{
    let mut env = Env::new(config.clone())?;
    let obs = env.reset(seed)?;
    let mut rec = DemoRecord::start(config, seed, obs);
    for _ in 0..max_steps {
        let actions: BTreeMap<String, Action> = env
            .agent_names()
            .into_iter()
            .map(|n| {
                let a = policy(&env, &n);
                (n, a)
            })
            .collect();
        let res = env.step(&actions)?;
        rec.push(&actions, &res);
        if res.done {
            break;
        }
    }
    Ok(rec)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub steps: usize,
    /// Per-agent totals, in the order agents finished.
    pub episodes: Vec<(String, TerminationReason, f64, f64)>,
}

fn mismatch(step: u64, agent: &str, field: impl Into<String>) -> DemoError {
    DemoError::Mismatch {
        step,
        agent: agent.to_string(),
        field: field.into(),
    }
}

fn same_vec(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Feed the recorded actions back through a fresh environment and compare
/// every observation, reward, cost and reason bit for bit. The first
/// difference is returned as [`DemoError::Mismatch`].
pub fn replay_demo(record: &DemoRecord) -> Result<ReplayReport, DemoError> {
    let mut env = Env::new(record.header.config.clone())?;
    let obs = env.reset(record.header.seed)?;
    if obs.keys().ne(record.header.initial_observations.keys()) {
        return Err(mismatch(0, "*", "agent set after reset"));
    }
    for (name, o) in &obs {
        if !same_vec(o, &record.header.initial_observations[name]) {
            return Err(mismatch(0, name, "observation"));
        }
    }
    let mut totals: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut report = ReplayReport::default();
    for rec in &record.steps {
        if env.is_done() {
            return Err(mismatch(rec.step, "*", "episode already ended"));
        }
        let res = match env.step(&rec.actions) {
            Ok(r) => r,
            Err(EnvError::Engine(e)) => return Err(mismatch(rec.step, "*", format!("actions rejected: {e}"))),
            Err(e) => return Err(e.into()),
        };
        if res.outcomes.keys().ne(rec.outcomes.keys()) {
            return Err(mismatch(rec.step, "*", "agent set"));
        }
        for (name, got) in &res.outcomes {
            let want = &rec.outcomes[name];
            let step = got.info.step;
            if step != rec.step {
                return Err(mismatch(rec.step, name, "step index"));
            }
            if got.reward.to_bits() != want.reward.to_bits() {
                return Err(mismatch(step, name, format!("reward {} != {}", got.reward, want.reward)));
            }
            if got.cost.to_bits() != want.cost.to_bits() {
                return Err(mismatch(step, name, format!("cost {} != {}", got.cost, want.cost)));
            }
            if got.reason != want.reason {
                return Err(mismatch(step, name, format!("reason {} != {}", got.reason.as_str(), want.reason.as_str())));
            }
            if !same_vec(&got.observation, &want.observation) {
                return Err(mismatch(step, name, "observation"));
            }
            let t = totals.entry(name.clone()).or_default();
            t.0 += got.reward;
            t.1 += got.cost;
            if got.terminated {
                let (r, c) = totals.remove(name).unwrap_or_default();
                report.episodes.push((name.clone(), got.reason, r, c));
            }
        }
        if res.new_agents.keys().ne(rec.new_agents.keys()) {
            return Err(mismatch(rec.step, "*", "respawned agents"));
        }
        report.steps += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::named_config;

    fn cfg() -> ScenarioConfig {
        let mut c = named_config("SingleAgentPG").unwrap();
        c.horizon = 100;
        c
    }

    #[test]
    fn record_then_replay_matches() {
        let rec = record_demo(&cfg(), 4, 100, |env, n| env.expert_action(n).unwrap()).unwrap();
        assert!(!rec.steps.is_empty());
        let mut buf = Vec::new();
        rec.write_ndjson(&mut buf).unwrap();
        let back = DemoRecord::read_ndjson(&buf[..]).unwrap();
        assert_eq!(back, rec);
        let report = replay_demo(&back).unwrap();
        assert_eq!(report.steps, rec.steps.len());
    }

    #[test]
    fn tampered_action_is_caught() {
        let mut rec = record_demo(&cfg(), 4, 100, |env, n| env.expert_action(n).unwrap()).unwrap();
        assert!(rec.steps.len() > 50);
        for a in rec.steps[50].actions.values_mut() {
            a.steering = -a.steering + 0.5;
        }
        match replay_demo(&rec) {
            Err(DemoError::Mismatch { step, .. }) => assert!(step >= 50),
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn empty_episode() {
        let rec = record_demo(&cfg(), 1, 0, |_, _| Action::ZERO).unwrap();
        assert!(rec.steps.is_empty());
        let mut buf = Vec::new();
        rec.write_ndjson(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 1);
        assert_eq!(replay_demo(&rec).unwrap().steps, 0);
    }

    #[test]
    fn header_is_required() {
        assert!(matches!(DemoRecord::read_ndjson(&b""[..]), Err(DemoError::Format(_))));
        assert!(matches!(
            DemoRecord::read_ndjson(&b"{\"version\":1}\n"[..]),
            Err(DemoError::Parse { line: 1, .. })
        ));
    }
}
