use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::drive::{follow_command, leader_on_path};
use super::world::{Role, World};
use super::{EngineError, Manager, ObjectId, Transition};
use crate::dynamics::{Action, BodyClass, VehicleParams, VehicleState};
use crate::geom::{Obb, Vec2};
use crate::policies::{lane_change_decision, IdmParams, LaneChange, LaneFollower, LaneOption};
use crate::rng::SimRng;
use crate::roadnet::{LaneId, LaneKind, RoadNetwork, SpawnPoint};

/// Recycling radius used by single-agent scenes.
pub const RECYCLE_RADIUS: f64 = 200.0;
/// Spawns keep at least this distance from agents.
const AGENT_CLEARANCE: f64 = 10.0;
/// Random slot draws per vehicle before giving up on it.
const SPAWN_TRIES: usize = 10;
/// Steps between lane changes of one vehicle.
const LANE_CHANGE_COOLDOWN: u32 = 30;
/// Planned path kept ahead of each vehicle.
const PLAN_AHEAD: f64 = 120.0;
/// Remaining plan length at which a vehicle has arrived.
const ARRIVAL_MARGIN: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    /// Keep a constant number of moving vehicles, recycling arrivals.
    Respawn,
    /// Park vehicles at block spawn points until an agent enters the block.
    Trigger,
    /// Start from the first logged pose of every track and drive reactively.
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    /// Vehicles per 10 m of road lane (respawn) or slot fill ratio (trigger).
    pub density: f64,
    /// Overrides the density-derived count in respawn mode.
    pub fixed_count: Option<usize>,
    pub idm: IdmParams,
    /// Relative spread of the desired speed across vehicles.
    pub speed_spread: f64,
    pub params: VehicleParams,
    pub lane_change: bool,
    /// Recycle traffic farther than this from every agent.
    pub recycle_radius: Option<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mode: TrafficMode::Respawn,
            density: 0.1,
            fixed_count: None,
            idm: IdmParams::default(),
            speed_spread: 0.2,
            params: VehicleParams::default(),
            lane_change: true,
            recycle_radius: None,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(EngineError::Config(format!("traffic density must be >= 0, got {}", self.density)));
        }
        if self.mode == TrafficMode::Trigger && self.density > 1.0 {
            return Err(EngineError::Config("trigger fill ratio must be <= 1".into()));
        }
        Ok(())
    }

    /// Respawn-mode vehicle count for a network.
    pub fn respawn_count(&self, net: &RoadNetwork) -> usize {
        self.fixed_count.unwrap_or_else(|| {
            let len: f64 = net.lanes().iter().filter(|l| l.kind == LaneKind::Road).map(|l| l.length()).sum();
            (self.density * len / 10.0).round() as usize
        })
    }
}

/// Rule-based traffic: IDM car following, MOBIL lane changes and random
/// routing over successors.
pub struct IdmTrafficManager {
    config: TrafficConfig,
    owner: String,
    rng: SimRng,
    /// Trigger-mode block of each parked vehicle.
    waiting: BTreeMap<ObjectId, usize>,
}

#[derive(Serialize, Deserialize)]
struct TrafficState {
    owner: String,
    #[serde(with = "crate::rng::as_string")]
    rng: SimRng,
    waiting: BTreeMap<ObjectId, usize>,
}

fn nearest_agent(world: &World, p: Vec2) -> f64 {
    world
        .agents()
        .map(|a| a.state.position.distance(p))
        .fold(f64::INFINITY, f64::min)
}

impl IdmTrafficManager {
    pub fn new(config: TrafficConfig) -> Self {
        Self {
            config,
            owner: String::new(),
            rng: crate::rng::fork(0, &[]),
            waiting: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &TrafficConfig {
        &self.config
    }

    /// Vehicles still parked, by block.
    pub fn waiting(&self) -> &BTreeMap<ObjectId, usize> {
        &self.waiting
    }

    fn footprint(&self, slot: &SpawnPoint) -> Obb {
        Obb::new(slot.pose.position, slot.pose.heading, self.config.params.length + 1.0, self.config.params.width + 0.5)
    }

    fn usable(&self, world: &World, slot: &SpawnPoint) -> bool {
        let far = nearest_agent(world, slot.pose.position) >= AGENT_CLEARANCE;
        let near = match self.config.recycle_radius {
            Some(r) if world.agents().next().is_some() => nearest_agent(world, slot.pose.position) <= r,
            _ => true,
        };
        far && near && world.is_free(&self.footprint(slot))
    }

    /// Draw up to `SPAWN_TRIES` random slots and return the first usable one.
    fn draw_slot(&mut self, world: &World, slots: &[SpawnPoint]) -> Option<SpawnPoint> {
        if slots.is_empty() {
            return None;
        }
        for _ in 0..SPAWN_TRIES {
            let slot = slots[self.rng.random_range(0..slots.len() as u32) as usize];
            if self.usable(world, &slot) {
                return Some(slot);
            }
        }
        // crowded map: pick among the slots that are still usable
        let free: Vec<SpawnPoint> = slots.iter().filter(|s| self.usable(world, s)).copied().collect();
        if free.is_empty() {
            return None;
        }
        Some(free[self.rng.random_range(0..free.len() as u32) as usize])
    }

    /// Extend the plan with random successors until it reaches far enough.
    fn extend_plan(&mut self, net: &RoadNetwork, follower: &mut LaneFollower) {
        while follower.remaining(net) < PLAN_AHEAD {
            let last = follower.plan.back().copied().unwrap_or(follower.lane);
            let Ok(lane) = net.lane(last) else { return };
            if lane.successors.is_empty() {
                return;
            }
            let k = self.rng.random_range(0..lane.successors.len() as u32) as usize;
            follower.plan.push_back(lane.successors[k]);
        }
    }

    fn new_follower(&mut self, net: &RoadNetwork, lane: LaneId, s: f64) -> LaneFollower {
        let mut f = LaneFollower::new(lane, []);
        f.s = s;
        self.extend_plan(net, &mut f);
        f
    }

    fn spawn_at(&mut self, world: &mut World, slot: SpawnPoint, speed: f64) -> ObjectId {
        let state = VehicleState::new(slot.pose, speed, self.config.params, BodyClass::Traffic);
        let idm = self.config.idm.randomized(&mut self.rng, self.config.speed_spread);
        let follower = self.new_follower(&world.net.clone(), slot.lane, slot.s);
        let id = world.spawn_vehicle(&self.owner, Role::Traffic, state);
        let v = world.vehicles.get_mut(&id).expect("just spawned");
        v.idm = idm;
        v.follower = Some(follower);
        id
    }

    fn reset_respawn(&mut self, world: &mut World) {
        let want = self.config.respawn_count(&world.net);
        let slots: Vec<SpawnPoint> = world.map.traffic_slots.iter().map(|(_, s)| *s).collect();
        let mut placed = 0;
        for _ in 0..want {
            if let Some(slot) = self.draw_slot(world, &slots) {
                self.spawn_at(world, slot, 0.0);
                placed += 1;
            }
        }
        if placed < want {
            log::warn!("spawned {placed} of {want} traffic vehicles");
        }
    }

    fn reset_trigger(&mut self, world: &mut World) {
        let mut by_block: BTreeMap<usize, Vec<SpawnPoint>> = BTreeMap::new();
        let first_is_root = world.net.blocks().first().is_some();
        for (block, slot) in &world.map.traffic_slots {
            match block {
                Some(0) if first_is_root => {}
                Some(b) => by_block.entry(*b).or_default().push(*slot),
                None => by_block.entry(usize::MAX).or_default().push(*slot),
            }
        }
        for (block, mut slots) in by_block {
            let want = (self.config.density * slots.len() as f64).round() as usize;
            slots.shuffle(&mut self.rng);
            let mut placed = 0;
            for slot in slots {
                if placed == want {
                    break;
                }
                if !self.usable(world, &slot) {
                    continue;
                }
                let id = self.spawn_at(world, slot, 0.0);
                if block != usize::MAX {
                    world.vehicles.get_mut(&id).expect("spawned").active = false;
                    self.waiting.insert(id, block);
                }
                placed += 1;
            }
        }
    }

    fn reset_replay(&mut self, world: &mut World) -> Result<(), EngineError> {
        let Some(log) = world.map.tracks.clone() else {
            return Err(EngineError::Config("replay traffic needs logged tracks".into()));
        };
        for track in &log.tracks {
            let Some(p) = track.poses.first() else { continue };
            let pos = Vec2::new(p.x, p.y);
            let Ok(f) = world.net.world_to_frenet(pos, None) else { continue };
            let slot = SpawnPoint {
                lane: f.lane,
                s: f.s,
                pose: crate::geom::Pose::new(p.x, p.y, p.heading),
            };
            if !world.is_free(&self.footprint(&slot)) {
                continue;
            }
            let id = self.spawn_at(world, slot, p.speed);
            world.vehicles.get_mut(&id).expect("spawned").tag = Some(track.id.clone());
        }
        Ok(())
    }

    /// Release parked vehicles of every block an agent is inside.
    fn trigger(&mut self, world: &mut World) {
        if self.waiting.is_empty() {
            return;
        }
        let agents: Vec<Vec2> = world.agents().map(|a| a.state.position).collect();
        let entered: BTreeSet<usize> = world
            .map
            .trigger_zones
            .iter()
            .filter(|(_, zone)| agents.iter().any(|p| zone.contains(*p)))
            .map(|(b, _)| *b)
            .collect();
        self.waiting.retain(|id, block| {
            if entered.contains(block) {
                if let Some(v) = world.vehicles.get_mut(id) {
                    v.active = true;
                }
                false
            } else {
                true
            }
        });
    }

    fn lane_change(&mut self, world: &World, id: ObjectId) -> Option<LaneId> {
        let v = &world.vehicles[&id];
        let f = v.follower.as_ref()?;
        let net = &world.net;
        let lane = net.lane(f.lane).ok()?;
        if lane.kind != LaneKind::Road || f.l.abs() > 0.5 || f.plan.front().is_some_and(|n| Some(*n) == lane.left_neighbor || Some(*n) == lane.right_neighbor) {
            return None;
        }
        let hl = v.state.params.length / 2.0;
        let path: Vec<LaneId> = f.path().take(6).collect();
        let current = leader_on_path(world, id, hl, &path, f.s);
        let side = |n: Option<LaneId>| -> Option<(LaneOption, LaneId)> {
            let n = net.lane(n?).ok()?;
            let s = f.s / lane.length() * n.length();
            if n.kind != LaneKind::Road || n.length() - s < 20.0 {
                return None;
            }
            let mut path = vec![n.id];
            path.extend(n.successors.first().copied());
            let leader = leader_on_path(world, id, hl, &path, s);
            let follower = world
                .occupants(n.id)
                .iter()
                .rev()
                .find(|o| o.id != id && o.s <= s)
                .map(|o| (s - o.s - hl - o.half_length, o.speed));
            Some((LaneOption { leader, follower }, n.id))
        };
        let left = side(lane.left_neighbor);
        let right = side(lane.right_neighbor);
        match lane_change_decision(v.state.speed, current, left.map(|x| x.0), right.map(|x| x.0), &v.idm) {
            LaneChange::Keep => None,
            LaneChange::Left => left.map(|x| x.1),
            LaneChange::Right => right.map(|x| x.1),
        }
    }

    fn recycle_target(&mut self, world: &World) -> Option<SpawnPoint> {
        let slots: Vec<SpawnPoint> = world.map.traffic_slots.iter().map(|(_, s)| *s).collect();
        self.draw_slot(world, &slots)
    }
}

impl Manager for IdmTrafficManager {
    fn reset(&mut self, name: &str, world: &mut World, rng: SimRng) -> Result<(), EngineError> {
        self.config.validate()?;
        self.owner = name.to_string();
        self.rng = rng;
        self.waiting.clear();
        match self.config.mode {
            TrafficMode::Respawn => self.reset_respawn(world),
            TrafficMode::Trigger => self.reset_trigger(world),
            TrafficMode::Replay => self.reset_replay(world)?,
        }
        Ok(())
    }

    fn before_step(&mut self, world: &mut World, _actions: &BTreeMap<ObjectId, Action>) -> Result<(), EngineError> {
        let ids: Vec<ObjectId> = world
            .vehicles
            .values()
            .filter(|v| v.owner == self.owner && v.active)
            .map(|v| v.id)
            .collect();
        let net = world.net.clone();
        for id in &ids {
            let v = &world.vehicles[id];
            if self.config.lane_change && v.cooldown == 0 {
                if let Some(target) = self.lane_change(world, *id) {
                    let old = world.vehicles[id].follower.as_ref().expect("traffic follows a lane");
                    let mut f = LaneFollower::new(old.lane, [target]);
                    f.s = old.s;
                    f.l = old.l;
                    self.extend_plan(&net, &mut f);
                    let v = world.vehicles.get_mut(id).expect("listed");
                    v.follower = Some(f);
                    v.cooldown = LANE_CHANGE_COOLDOWN;
                }
            }
            let v = world.vehicles.get_mut(id).expect("listed");
            v.cooldown = v.cooldown.saturating_sub(1);
            let mut f = v.follower.take().expect("traffic follows a lane");
            self.extend_plan(&net, &mut f);
            world.vehicles.get_mut(id).expect("listed").follower = Some(f);
        }
        // commands from a consistent snapshot of the world
        let mut commands = Vec::with_capacity(ids.len());
        for id in &ids {
            let v = &world.vehicles[id];
            let f = v.follower.as_ref().expect("traffic follows a lane");
            commands.push(follow_command(world, *id, &v.state, f, &v.idm).0);
        }
        for (id, a) in ids.iter().zip(commands) {
            world.vehicles.get_mut(id).expect("listed").command = a;
        }
        Ok(())
    }

    fn after_step(&mut self, world: &mut World, _transition: &Transition) -> Result<(), EngineError> {
        self.trigger(world);
        let net = world.net.clone();
        let radius = self.config.recycle_radius;
        let has_agents = world.agents().next().is_some();
        let done: Vec<ObjectId> = world
            .vehicles
            .values()
            .filter(|v| v.owner == self.owner && v.active)
            .filter(|v| {
                let arrived = v.follower.as_ref().is_none_or(|f| f.remaining(&net) < ARRIVAL_MARGIN);
                let far = has_agents && radius.is_some_and(|r| nearest_agent(world, v.state.position) > r);
                arrived || far
            })
            .map(|v| v.id)
            .collect();
        for id in done {
            if self.config.mode != TrafficMode::Respawn {
                world.despawn(id);
                continue;
            }
            // park the vehicle off the map while looking for a free slot
            let v = world.vehicles.remove(&id).expect("listed");
            match self.recycle_target(world) {
                Some(slot) => {
                    let follower = self.new_follower(&net, slot.lane, slot.s);
                    let mut v = v;
                    v.state = VehicleState::new(slot.pose, 0.0, v.state.params, BodyClass::Traffic);
                    v.follower = Some(follower);
                    v.frenet = None;
                    v.cooldown = 0;
                    world.vehicles.insert(id, v);
                }
                None => {
                    world.vehicles.insert(id, v);
                    world.despawn(id);
                }
            }
        }
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::to_value(TrafficState {
            owner: self.owner.clone(),
            rng: self.rng.clone(),
            waiting: self.waiting.clone(),
        })
        .expect("serializable")
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        let s: TrafficState = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        self.owner = s.owner;
        self.rng = s.rng;
        self.waiting = s.waiting;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
