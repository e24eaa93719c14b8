use std::any::Any;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::{Role, World};
use super::{EngineError, Manager, ObjectId};
use crate::dynamics::{clamp_action, Action, BodyClass, VehicleParams, VehicleState};
use crate::geom::Obb;
use crate::policies::LaneFollower;
use crate::rng::SimRng;
use crate::roadnet::{route_search, Destination, Route, SpawnPoint};

/// Spawn margin kept free around a new agent, in metres.
const SPAWN_MARGIN: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentSpawnConfig {
    pub count: usize,
    pub params: VehicleParams,
    pub initial_speed: f64,
    /// Shortest acceptable route for multi-agent spawns.
    pub min_route: f64,
    /// Exits tried per spawn slot before moving on.
    pub exit_tries: usize,
}

impl Default for AgentSpawnConfig {
    fn default() -> Self {
        Self {
            count: 1,
            params: VehicleParams::default(),
            initial_speed: 0.0,
            min_route: 40.0,
            exit_tries: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentInfo {
    pub name: String,
    pub vehicle: ObjectId,
    pub route: Route,
    /// Route distance at spawn.
    pub start_progress: f64,
    pub spawned_at: u64,
}

/// Binds external action channels to vehicles. Agent names are never
/// reused within an episode.
pub struct AgentManager {
    config: AgentSpawnConfig,
    owner: String,
    agents: BTreeMap<String, AgentInfo>,
    next_index: u64,
    rng: SimRng,
}

#[derive(Serialize, Deserialize)]
struct AgentState {
    owner: String,
    agents: BTreeMap<String, AgentInfo>,
    next_index: u64,
    #[serde(with = "crate::rng::as_string")]
    rng: SimRng,
}

impl AgentManager {
    pub fn new(config: AgentSpawnConfig) -> Self {
        Self {
            config,
            owner: String::new(),
            agents: BTreeMap::new(),
            next_index: 0,
            rng: crate::rng::fork(0, &[]),
        }
    }

    pub fn config(&self) -> &AgentSpawnConfig {
        &self.config
    }

    pub fn agents(&self) -> &BTreeMap<String, AgentInfo> {
        &self.agents
    }

    pub fn get(&self, name: &str) -> Option<&AgentInfo> {
        self.agents.get(name)
    }

    pub fn vehicle_of(&self, name: &str) -> Result<ObjectId, EngineError> {
        self.agents
            .get(name)
            .map(|a| a.vehicle)
            .ok_or_else(|| EngineError::UnknownAgent(name.to_string()))
    }

    fn fresh_name(&mut self) -> String {
        let name = format!("agent{}", self.next_index);
        self.next_index += 1;
        name
    }

    fn place(&mut self, world: &mut World, slot: SpawnPoint, route: Route) -> String {
        let state = VehicleState::new(slot.pose, self.config.initial_speed, self.config.params, BodyClass::Ego);
        let id = world.spawn_vehicle(&self.owner, Role::Agent, state);
        let mut follower = LaneFollower::new(route.lanes[0], route.lanes[1..].iter().copied());
        follower.s = slot.s;
        let v = world.vehicles.get_mut(&id).expect("just spawned");
        v.follower = Some(follower);
        let name = self.fresh_name();
        v.tag = Some(name.clone());
        let start_progress = route.progress(slot.lane, slot.s).unwrap_or(0.0);
        self.agents.insert(
            name.clone(),
            AgentInfo {
                name: name.clone(),
                vehicle: id,
                route,
                start_progress,
                spawned_at: world.step,
            },
        );
        name
    }

    fn spawn_box(&self, slot: &SpawnPoint) -> Obb {
        let p = &self.config.params;
        Obb::new(slot.pose.position, slot.pose.heading, p.length + 2.0 * SPAWN_MARGIN, p.width + SPAWN_MARGIN)
    }

    fn spawn_single(&mut self, world: &mut World) -> Result<String, EngineError> {
        let map = &world.map;
        let starts = if map.ego_starts.is_empty() { &map.agent_slots } else { &map.ego_starts };
        if starts.is_empty() {
            return Err(EngineError::Config("map has no ego spawn".into()));
        }
        let slot = starts[self.rng.random_range(0..starts.len() as u32) as usize];
        let route = match map.destination {
            Some(dest) => route_search(&world.net, slot.lane, dest)?,
            None => self
                .pick_route(world, &slot, 0.0)
                .ok_or_else(|| EngineError::Config("no reachable destination".into()))?,
        };
        Ok(self.place(world, slot, route))
    }

    fn pick_route(&mut self, world: &World, slot: &SpawnPoint, min_len: f64) -> Option<Route> {
        let mut exits: Vec<Destination> = world.map.exits.clone();
        exits.shuffle(&mut self.rng);
        exits
            .iter()
            .take(self.config.exit_tries)
            .filter_map(|d| route_search(&world.net, slot.lane, *d).ok())
            .find(|r| r.length - r.progress(slot.lane, slot.s).unwrap_or(0.0) > min_len)
    }

    /// Spawn one more agent at a random free slot with a random exit.
    /// Returns `None` when no slot is usable.
    pub fn spawn_agent(&mut self, world: &mut World) -> Option<String> {
        let mut slots = world.map.agent_slots.clone();
        slots.shuffle(&mut self.rng);
        for slot in slots {
            if !world.is_free(&self.spawn_box(&slot)) {
                continue;
            }
            if let Some(route) = self.pick_route(world, &slot, self.config.min_route) {
                return Some(self.place(world, slot, route));
            }
        }
        None
    }

    /// Remove an agent and its vehicle.
    pub fn remove_agent(&mut self, world: &mut World, name: &str) -> Result<AgentInfo, EngineError> {
        let info = self
            .agents
            .remove(name)
            .ok_or_else(|| EngineError::UnknownAgent(name.to_string()))?;
        world.despawn(info.vehicle);
        Ok(info)
    }
}

impl Manager for AgentManager {
    fn reset(&mut self, name: &str, world: &mut World, rng: SimRng) -> Result<(), EngineError> {
        self.owner = name.to_string();
        self.agents.clear();
        self.next_index = 0;
        self.rng = rng;
        if self.config.count == 1 {
            self.spawn_single(world)?;
            return Ok(());
        }
        for _ in 0..self.config.count {
            if self.spawn_agent(world).is_none() {
                log::warn!(
                    "only {} of {} agents could be spawned",
                    self.agents.len(),
                    self.config.count
                );
                break;
            }
        }
        Ok(())
    }

    fn before_step(&mut self, world: &mut World, actions: &BTreeMap<ObjectId, Action>) -> Result<(), EngineError> {
        for (name, info) in &self.agents {
            let a = actions.get(&info.vehicle).ok_or_else(|| EngineError::MissingAction(name.clone()))?;
            let (a, _) = clamp_action(a.steering, a.throttle_brake);
            if let Some(v) = world.vehicles.get_mut(&info.vehicle) {
                v.command = a;
            }
        }
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::to_value(AgentState {
            owner: self.owner.clone(),
            agents: self.agents.clone(),
            next_index: self.next_index,
            rng: self.rng.clone(),
        })
        .expect("serializable")
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        let s: AgentState = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        self.owner = s.owner;
        self.agents = s.agents;
        self.next_index = s.next_index;
        self.rng = s.rng;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
