//! Human driving sessions: the message protocol spoken by the streaming
//! server and the session loop behind it.
//!
//! The session is transport-free. A server feeds it parsed client messages
//! and calls [`TeleopSession::tick`] once per decision step; every tick
//! yields one [`FrameMessage`].

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_action, Action};
use crate::engine::Role;
use crate::env::{Env, EnvError, ScenarioConfig, StepResult, TerminationReason};
use crate::scenario_io::{DemoError, DemoRecord};

/// Messages a client sends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Control {
        #[serde(default)]
        session: Option<String>,
        steering: f64,
        throttle_brake: f64,
    },
    Reset {
        #[serde(default)]
        seed: Option<u64>,
    },
    RecordStart,
    RecordStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Ego,
    Agent,
    Traffic,
    Replay,
    Obstacle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyView {
    pub id: u64,
    pub class: BodyKind,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub reward: f64,
    pub cost: f64,
    pub reason: TerminationReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub session: String,
    pub episode: u64,
    pub step: u64,
    pub bodies: Vec<BodyView>,
    /// Remaining route checkpoints of the driven agent.
    pub route: Vec<[f64; 2]>,
    /// Action applied to the driven agent in this step.
    pub action: Action,
    pub last: Option<OutcomeSummary>,
    pub recording: bool,
    pub done: bool,
}

/// Messages the server sends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(FrameMessage),
    Error { message: String },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error { message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

/// Parse one text frame from a client.
pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}

/// What handling a message changed, for the server to report.
#[derive(Clone, Debug, PartialEq)]
pub enum Handled {
    Held,
    Reset,
    RecordingStarted,
    RecordingStopped(Option<PathBuf>),
}

pub struct TeleopSession {
    id: String,
    env: Env,
    seed: u64,
    episode: u64,
    held: Action,
    driven: Option<String>,
    last: Option<OutcomeSummary>,
    step: u64,
    record: Option<DemoRecord>,
    record_dir: Option<PathBuf>,
    saved: usize,
    finished: Vec<DemoRecord>,
    /// (step, action) of the driven agent for every tick.
    applied: Vec<(u64, Action)>,
    pending_reset: bool,
}

impl TeleopSession {
    pub fn new(id: &str, config: ScenarioConfig, seed: u64) -> Result<Self, EnvError> {
        let env = Env::new(config)?;
        let mut s = Self {
            id: id.to_string(),
            env,
            seed,
            episode: 0,
            held: Action::ZERO,
            driven: None,
            last: None,
            step: 0,
            record: None,
            record_dir: None,
            saved: 0,
            finished: Vec::new(),
            applied: Vec::new(),
            pending_reset: false,
        };
        s.reset(seed)?;
        Ok(s)
    }

    /// Write finished recordings as `demo_<n>.ndjson` under `dir`.
    pub fn with_record_dir(mut self, dir: PathBuf) -> Self {
        self.record_dir = Some(dir);
        self
    }

    pub fn env(&self) -> &Env {
        &self.env
    }

    pub fn held(&self) -> Action {
        self.held
    }

    pub fn recording(&self) -> bool {
        self.record.is_some()
    }

    pub fn applied(&self) -> &[(u64, Action)] {
        &self.applied
    }

    /// Recordings completed in this session when no directory is set.
    pub fn take_recordings(&mut self) -> Vec<DemoRecord> {
        std::mem::take(&mut self.finished)
    }

    fn reset(&mut self, seed: u64) -> Result<BTreeMap<String, Vec<f64>>, EnvError> {
        self.seed = seed;
        let obs = self.env.reset(seed)?;
        self.driven = obs.keys().next().cloned();
        self.episode += 1;
        self.step = 0;
        self.last = None;
        self.pending_reset = false;
        Ok(obs)
    }

    fn close_recording(&mut self) -> Result<Option<PathBuf>, DemoError> {
        let Some(rec) = self.record.take() else {
            return Ok(None);
        };
        match &self.record_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("demo_{:03}.ndjson", self.saved));
                self.saved += 1;
                rec.save(&path)?;
                Ok(Some(path))
            }
            None => {
                self.finished.push(rec);
                Ok(None)
            }
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Result<Handled, DemoError> {
        match msg {
            ClientMessage::Control {
                steering, throttle_brake, ..
            } => {
                self.held = clamp_action(steering, throttle_brake).0;
                Ok(Handled::Held)
            }
            ClientMessage::Reset { seed } => {
                self.close_recording()?;
                self.reset(seed.unwrap_or(self.seed))?;
                self.held = Action::ZERO;
                Ok(Handled::Reset)
            }
            ClientMessage::RecordStart => {
                // a demo must start from a reset to be replayable
                self.close_recording()?;
                let obs = self.reset(self.seed)?;
                self.record = Some(DemoRecord::start(self.env.config(), self.seed, obs));
                Ok(Handled::RecordingStarted)
            }
            ClientMessage::RecordStop => Ok(Handled::RecordingStopped(self.close_recording()?)),
        }
    }

    /// Advance one decision step with the held action on the driven agent
    /// and the built-in driver on any other agent.
    pub fn tick(&mut self) -> Result<FrameMessage, DemoError> {
        if self.pending_reset {
            self.close_recording()?;
            self.reset(self.seed)?;
        }
        if self.driven.as_ref().is_none_or(|d| self.env.vehicle_of(d).is_none()) {
            self.driven = self.env.agent_names().into_iter().next();
        }
        let mut actions = self.env.expert_actions();
        if let Some(d) = &self.driven {
            actions.insert(d.clone(), self.held);
        }
        let res: StepResult = self.env.step(&actions)?;
        self.step = res.transition.step;
        self.applied.push((self.step, self.held));
        if let Some(rec) = &mut self.record {
            rec.push(&actions, &res);
        }
        self.last = self
            .driven
            .as_ref()
            .and_then(|d| res.outcomes.get(d))
            .map(|o| OutcomeSummary {
                reward: o.reward,
                cost: o.cost,
                reason: o.reason,
            });
        if res.done {
            self.pending_reset = true;
        }
        Ok(self.frame(res.done))
    }

    /// Frame of the current state without stepping.
    pub fn frame(&self, done: bool) -> FrameMessage {
        let world = self.env.world();
        let driven_id = self.driven.as_ref().and_then(|d| self.env.vehicle_of(d));
        let mut bodies: Vec<BodyView> = world
            .vehicles
            .values()
            .filter(|v| v.active || v.role != Role::Traffic)
            .map(|v| BodyView {
                id: v.id,
                class: match v.role {
                    _ if Some(v.id) == driven_id => BodyKind::Ego,
                    Role::Agent => BodyKind::Agent,
                    Role::Traffic => BodyKind::Traffic,
                    Role::Replay => BodyKind::Replay,
                },
                x: v.state.position.x,
                y: v.state.position.y,
                heading: v.state.heading,
                speed: v.state.speed,
                length: v.state.params.length,
                width: v.state.params.width,
            })
            .collect();
        bodies.extend(world.obstacles.values().map(|o| BodyView {
            id: o.id,
            class: BodyKind::Obstacle,
            x: o.body.pose.position.x,
            y: o.body.pose.position.y,
            heading: o.body.pose.heading,
            speed: 0.0,
            length: 2.0 * o.body.half_length,
            width: 2.0 * o.body.half_width,
        }));
        let route = self
            .driven
            .as_ref()
            .and_then(|d| {
                let info = self.env.agents().get(d)?;
                let p = self.env.progress(d).unwrap_or(0.0);
                Some(
                    info.route
                        .checkpoints
                        .iter()
                        .filter(|(_, s)| *s > p)
                        .map(|(c, _)| [c.x, c.y])
                        .collect(),
                )
            })
            .unwrap_or_default();
        FrameMessage {
            session: self.id.clone(),
            episode: self.episode,
            step: self.step,
            bodies,
            route,
            action: self.applied.last().map(|a| a.1).unwrap_or(Action::ZERO),
            last: self.last,
            recording: self.record.is_some(),
            done,
        }
    }
}
