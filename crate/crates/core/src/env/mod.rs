//! Reset/step facade over the engine: routes, observations, reward, cost
//! and termination for every agent.

mod catalog;
mod config;
mod evaluate;
mod layouts;
mod reward;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{make_named_env, named_config, SCENARIO_NAMES};
pub use config::{MapSpec, ScenarioConfig};
pub use evaluate::{evaluate, EpisodeRecord, Metrics};
pub use layouts::{Layout, GATE_LENGTH};
pub use reward::{
    compute_cost, compute_reward, termination_check, AgentEvents, ContactEvents, RewardConfig, TerminationReason,
};

use crate::dynamics::Action;
use crate::engine::{
    follow_command, AgentInfo, AgentManager, AgentSpawnConfig, Engine, EngineError, IdmTrafficManager, MapManager,
    MapSource, ObjectId, ObjectManager, ReplayTrafficManager, TollgateManager, Transition, World, TOLLGATE_MANAGER,
};
use crate::geom::{Obb, Segment};
use crate::policies::IdmParams;
use crate::rng::{fork_named, SimRng};
use crate::scenario_io::{import_scenario, ImportError};
use crate::sensing::{assemble_observation, ego_state_vector, lidar_scan, navigation_obs, Navigation};

pub const MAP_MANAGER: &str = "map";
pub const AGENT_MANAGER: &str = "agents";
pub const TRAFFIC_MANAGER: &str = "traffic";
pub const OBJECT_MANAGER: &str = "objects";

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("config: {0}")]
    Config(String),
    #[error("step after the episode ended; call reset")]
    Finished,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Import(#[from] ImportError),
}

/// Per-step facts behind an agent's reward, for logging and checking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: u64,
    /// Route distance before and after the step.
    pub prev_progress: f64,
    pub progress: f64,
    pub speed: f64,
    pub events: AgentEvents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub cost: f64,
    pub terminated: bool,
    pub reason: TerminationReason,
    pub info: StepInfo,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// Outcome of every agent that acted this step.
    pub outcomes: BTreeMap<String, StepOutcome>,
    /// Agents spawned to replace terminated ones, with first observations.
    pub new_agents: BTreeMap<String, Vec<f64>>,
    /// The episode is over; `reset` before stepping again.
    pub done: bool,
    pub transition: Transition,
}

/// Wall-clock time spent in each part of `step`, summed since creation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    /// Managers and physics.
    pub engine: Duration,
    /// Lidar and state vectors.
    pub sensing: Duration,
    /// Contacts, progress, reward, cost and termination.
    pub reward: Duration,
}

#[derive(Clone, Debug)]
struct Tracker {
    nav: Navigation,
    progress: f64,
}

pub struct Env {
    config: ScenarioConfig,
    engine: Engine,
    trackers: BTreeMap<String, Tracker>,
    lidar_rng: SimRng,
    done: bool,
    ready: bool,
    times: PhaseTimes,
}

fn map_source(spec: &MapSpec) -> Result<MapSource, EnvError> {
    Ok(match spec {
        MapSpec::Pg { config, start_seed } => MapSource::Pg {
            config: config.clone(),
            start_seed: *start_seed,
            num_scenarios: config.map_count as u64,
        },
        MapSpec::Layout { name } => MapSource::Fixed(vec![Arc::new(name.build())]),
        MapSpec::Scenarios { documents } => MapSource::Fixed(
            documents
                .iter()
                .map(|d| Ok(Arc::new(import_scenario(d)?.prepare()?)))
                .collect::<Result<_, ImportError>>()?,
        ),
    })
}

/// Whether an oriented box crosses any road-edge segment.
fn touches_edge(obb: &Obb, edges: &[Segment]) -> bool {
    let r = obb.bounding_radius();
    let sides = obb.edges();
    edges.iter().any(|e| {
        let mid = e.a.lerp(e.b, 0.5);
        if mid.distance(obb.center) > r + e.a.distance(e.b) / 2.0 {
            return false;
        }
        obb.contains(e.a) || obb.contains(e.b) || sides.iter().any(|s| s.intersection(e).is_some())
    })
}

impl Env {
    pub fn new(config: ScenarioConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let mut engine = Engine::new();
        engine.register_manager(MAP_MANAGER, Box::new(MapManager::new(map_source(&config.map)?)))?;
        let spawn = AgentSpawnConfig {
            count: config.agents,
            params: config.vehicle,
            min_route: config.min_route,
            ..AgentSpawnConfig::default()
        };
        engine.register_manager(AGENT_MANAGER, Box::new(AgentManager::new(spawn)))?;
        if let Some(t) = &config.traffic {
            engine.register_manager(TRAFFIC_MANAGER, Box::new(IdmTrafficManager::new(t.clone())))?;
        } else if config.replay_traffic {
            engine.register_manager(TRAFFIC_MANAGER, Box::new(ReplayTrafficManager::default()))?;
        }
        if config.obstacle_density > 0.0 {
            engine.register_manager(OBJECT_MANAGER, Box::new(ObjectManager::new(config.obstacle_density)))?;
        }
        if config.tollgate {
            engine.register_manager(TOLLGATE_MANAGER, Box::new(TollgateManager::new()))?;
        }
        Ok(Self {
            config,
            engine,
            trackers: BTreeMap::new(),
            lidar_rng: fork_named(0, "lidar", &[]),
            done: false,
            ready: false,
            times: PhaseTimes::default(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    /// Direct engine access for composing custom scenes and tests.
    pub fn engine_mut(&mut self) -> &mut Engine {
        &mut self.engine
    }

    pub fn world(&self) -> &World {
        self.engine.world()
    }

    pub fn phase_times(&self) -> PhaseTimes {
        self.times
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn agent_manager(&self) -> &AgentManager {
        self.engine.manager::<AgentManager>(AGENT_MANAGER).expect("agent manager registered")
    }

    /// Active agents by name.
    pub fn agents(&self) -> &BTreeMap<String, AgentInfo> {
        self.agent_manager().agents()
    }

    pub fn agent_names(&self) -> Vec<String> {
        self.agents().keys().cloned().collect()
    }

    pub fn vehicle_of(&self, name: &str) -> Option<ObjectId> {
        self.agents().get(name).map(|a| a.vehicle)
    }

    /// Route distance of an agent from its current position.
    pub fn progress(&self, name: &str) -> Option<f64> {
        let info = self.agents().get(name)?;
        let f = self.world().vehicles.get(&info.vehicle)?.frenet?;
        info.route.progress(f.lane, f.s)
    }

    pub fn reset(&mut self, seed: u64) -> Result<BTreeMap<String, Vec<f64>>, EnvError> {
        self.engine.reset(seed)?;
        self.lidar_rng = fork_named(seed, "lidar", &[]);
        self.trackers.clear();
        self.done = false;
        self.ready = true;
        let names = self.agent_names();
        if names.is_empty() {
            return Err(EnvError::Config("no agent could be spawned".into()));
        }
        let mut obs = BTreeMap::new();
        for name in names {
            self.track(&name);
            obs.insert(name.clone(), self.observe(&name));
        }
        Ok(obs)
    }

    fn track(&mut self, name: &str) {
        let progress = self.progress(name).unwrap_or(0.0);
        let info = &self.agents()[name];
        let pos = self.world().vehicles[&info.vehicle].state.position;
        let mut nav = Navigation::default();
        nav.update(&info.route, pos, progress);
        self.trackers.insert(name.to_string(), Tracker { nav, progress });
    }

    /// Current observation of an agent.
    pub fn observe(&mut self, name: &str) -> Vec<f64> {
        let info = self.agent_manager().get(name).expect("active agent").clone();
        let world = self.engine.world();
        let v = &world.vehicles[&info.vehicle];
        let bodies: Vec<Obb> = world.obbs_except(v.id);
        let walls: &[Segment] = if self.config.lidar.hit_sidewalks { world.map.sidewalks.as_slice() } else { &[] };
        let noise = (self.config.lidar.noise > 0.0).then_some(&mut self.lidar_rng);
        let lidar = lidar_scan(&self.config.lidar, v.state.pose(), bodies.iter(), walls, noise);
        let hint = v.frenet.map(|f| f.lane);
        let local = world.net.world_to_frenet(v.state.position, hint).ok().or(v.frenet);
        let ego = match local.and_then(|f| world.net.lane(f.lane).ok().map(|l| (f, l))) {
            Some((f, lane)) => {
                let s = f.s.clamp(0.0, lane.length());
                ego_state_vector(&v.state, &f, lane.heading_at(s), lane.width, self.config.reward.v_max)
            }
            None => [0.0; 5],
        };
        let targets = self.trackers[name].nav.targets(&info.route);
        let nav = navigation_obs(targets, v.state.pose());
        let mut obs = assemble_observation(&lidar, &ego, &nav);
        if self.config.tollgate {
            let gate = self.engine.manager::<TollgateManager>(TOLLGATE_MANAGER).expect("registered");
            obs.extend_from_slice(&gate.observation(info.vehicle));
        }
        obs
    }

    /// Command of the built-in rule-based driver for an agent: pure pursuit
    /// along its route and IDM speed control.
    pub fn expert_action(&self, name: &str) -> Result<Action, EnvError> {
        let id = self
            .vehicle_of(name)
            .ok_or_else(|| EngineError::UnknownAgent(name.to_string()))?;
        let world = self.world();
        let v = &world.vehicles[&id];
        let f = v.follower.as_ref().expect("agents follow their route");
        let idm = IdmParams {
            desired_speed: self.config.expert_speed,
            ..IdmParams::default()
        };
        Ok(follow_command(world, id, &v.state, f, &idm).0)
    }

    /// Expert commands for every active agent.
    pub fn expert_actions(&self) -> BTreeMap<String, Action> {
        self.agent_names()
            .into_iter()
            .map(|n| {
                let a = self.expert_action(&n).expect("active agent");
                (n, a)
            })
            .collect()
    }

    fn events(&self, name: &str, transition: &Transition) -> AgentEvents {
        let info = &self.agents()[name];
        let world = self.world();
        let v = &world.vehicles[&info.vehicle];
        let mut contacts = ContactEvents::default();
        for other in transition.contacts_of(v.id) {
            if world.vehicles.contains_key(&other) {
                contacts.vehicles += 1;
            } else if world.obstacles.contains_key(&other) {
                contacts.objects += 1;
            }
        }
        contacts.sidewalk = touches_edge(&v.state.obb(), &world.map.sidewalks);
        let off = match world.net.world_to_frenet(v.state.position, v.frenet.map(|f| f.lane)) {
            Ok(f) => {
                let w = world.net.lane(f.lane).map(|l| l.width).unwrap_or(0.0);
                f.l.abs() > w / 2.0 + self.config.out_of_road_margin
            }
            Err(_) => true,
        };
        let violated = self.config.tollgate
            && self
                .engine
                .manager::<TollgateManager>(TOLLGATE_MANAGER)
                .is_some_and(|g| g.violated(v.id));
        let progress = self.progress(name).unwrap_or(self.trackers[name].progress);
        AgentEvents {
            contacts,
            out_of_road: off || violated,
            arrived: progress >= info.route.length - self.config.arrival_margin,
        }
    }

    /// Advance every agent by one decision step. `actions` needs exactly one
    /// entry per active agent.
    pub fn step(&mut self, actions: &BTreeMap<String, Action>) -> Result<StepResult, EnvError> {
        if !self.ready {
            return Err(EngineError::NotReset.into());
        }
        if self.done {
            return Err(EnvError::Finished);
        }
        let mut by_id = BTreeMap::new();
        for (name, a) in actions {
            let id = self
                .vehicle_of(name)
                .ok_or_else(|| EngineError::UnknownAgent(name.clone()))?;
            by_id.insert(id, *a);
        }
        let t0 = Instant::now();
        let mut transition = self.engine.step(&by_id)?;
        self.times.engine += t0.elapsed();
        let step = transition.step;
        let multi = self.config.agents > 1;
        let mut result = StepResult::default();
        for name in self.agent_names() {
            let t1 = Instant::now();
            let events = self.events(&name, &transition);
            let reason = termination_check(&events, self.config.safe_mode, step, self.config.horizon);
            let prev = self.trackers[&name].progress;
            let progress = self.progress(&name).unwrap_or(prev);
            let id = self.agents()[&name].vehicle;
            let speed = self.world().vehicles[&id].state.speed;
            let reward = compute_reward(prev, progress, speed, reason, &self.config.reward);
            let cost = compute_cost(&events.contacts);
            {
                let route = self.agents()[&name].route.clone();
                let pos = self.world().vehicles[&id].state.position;
                let t = self.trackers.get_mut(&name).expect("tracked");
                t.progress = progress;
                t.nav.update(&route, pos, progress);
            }
            let t2 = Instant::now();
            self.times.reward += t2 - t1;
            let observation = self.observe(&name);
            self.times.sensing += t2.elapsed();
            result.outcomes.insert(
                name,
                StepOutcome {
                    observation,
                    reward,
                    cost,
                    terminated: reason.is_terminal(),
                    reason,
                    info: StepInfo {
                        step,
                        prev_progress: prev,
                        progress,
                        speed,
                        events,
                    },
                },
            );
        }
        // retire terminated agents and, in multi-agent scenes, replace them
        let finished: Vec<(String, TerminationReason)> = result
            .outcomes
            .iter()
            .filter(|(_, o)| o.terminated)
            .map(|(n, o)| (n.clone(), o.reason))
            .collect();
        let horizon = step >= self.config.horizon;
        if multi {
            for (name, reason) in &finished {
                let (am, world) = self
                    .engine
                    .manager_and_world::<AgentManager>(AGENT_MANAGER)
                    .expect("agent manager registered");
                am.remove_agent(world, name)?;
                self.trackers.remove(name);
                if self.config.respawn && *reason != TerminationReason::Horizon && !horizon {
                    if let Some(new) = am.spawn_agent(world) {
                        world.refresh();
                        self.track(&new);
                        let obs = self.observe(&new);
                        result.new_agents.insert(new, obs);
                    }
                }
            }
            let (spawned, despawned) = self.engine.world_mut().take_log();
            transition.spawned.extend(spawned);
            transition.despawned.extend(despawned);
            self.done = horizon || self.agents().is_empty();
        } else {
            self.done = !finished.is_empty();
        }
        result.done = self.done;
        result.transition = transition;
        Ok(result)
    }
}
