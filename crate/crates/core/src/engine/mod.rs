//! Object/manager kernel. Managers own objects and run in registration
//! order; the engine advances physics and collects contact events.

mod agents;
mod drive;
mod map;
mod objects;
mod replay;
#[cfg(test)]
mod tests;
mod tollgate;
mod traffic;
mod world;

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agents::{AgentInfo, AgentManager, AgentSpawnConfig};
pub use drive::{follow_command, leader_on_path, EXPERT_LOOKAHEAD_GAIN, LEADER_HORIZON};
pub use map::{MapInfo, MapManager, MapSource, PreparedMap};
pub use objects::{ObjectManager, OBSTACLE_CLEARANCE};
pub use replay::ReplayTrafficManager;
pub use tollgate::{TollgateManager, TOLLGATE_MANAGER};
pub use traffic::{IdmTrafficManager, TrafficConfig, TrafficMode, RECYCLE_RADIUS};
pub use world::{Obstacle, Occupant, Role, Vehicle, World};

use crate::dynamics::{collision_check, step_vehicle, Action, SUBSTEP, SUBSTEPS};
use crate::geom::{wrap_angle, Pose};
use crate::procgen::ProcgenError;
use crate::rng::{fork_named, SimRng};
use crate::roadnet::RoadError;

pub type ObjectId = u64;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("manager registry: {0}")]
    Registry(String),
    #[error("config: {0}")]
    Config(String),
    #[error("engine stepped before reset")]
    NotReset,
    #[error("no action for agent {0}")]
    MissingAction(String),
    #[error("action for unknown agent {0}")]
    UnknownAgent(String),
    #[error("manager state: {0}")]
    State(String),
    #[error(transparent)]
    Road(#[from] RoadError),
    #[error(transparent)]
    Procgen(#[from] ProcgenError),
}

/// Lifecycle owner for one class of objects.
pub trait Manager: Send {
    /// Whether this manager installs the road network on reset.
    fn provides_map(&self) -> bool {
        false
    }

    /// Re-create this manager's objects. `name` is the registry name the
    /// objects must be owned by.
    fn reset(&mut self, name: &str, world: &mut World, rng: SimRng) -> Result<(), EngineError>;

    /// Assign commands to owned vehicles before physics runs.
    fn before_step(&mut self, _world: &mut World, _actions: &BTreeMap<ObjectId, Action>) -> Result<(), EngineError> {
        Ok(())
    }

    /// Spawn and recycle after physics and event collection.
    fn after_step(&mut self, _world: &mut World, _transition: &Transition) -> Result<(), EngineError> {
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value;

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError>;

    fn as_any(&self) -> &dyn Any;

    fn as_any_mut(&mut self) -> &mut dyn Any;
}

/// What happened during one engine step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Clock value after the step.
    pub step: u64,
    /// Overlapping body pairs seen during any substep, `a < b`.
    pub contacts: Vec<(ObjectId, ObjectId)>,
    pub spawned: Vec<ObjectId>,
    pub despawned: Vec<ObjectId>,
}

impl Transition {
    /// Other bodies `id` touched this step.
    pub fn contacts_of(&self, id: ObjectId) -> impl Iterator<Item = ObjectId> + '_ {
        self.contacts.iter().filter_map(move |&(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }
}

pub struct Engine {
    managers: Vec<(String, Box<dyn Manager>)>,
    world: World,
    ready: bool,
}

impl Default for Engine {
    fn default() -> Self {
        Self::new()
    }
}

impl Engine {
    pub fn new() -> Self {
        Self {
            managers: Vec::new(),
            world: World::empty(),
            ready: false,
        }
    }

    pub fn register_manager(&mut self, name: &str, manager: Box<dyn Manager>) -> Result<(), EngineError> {
        if self.managers.iter().any(|(n, _)| n == name) {
            return Err(EngineError::Registry(format!("manager {name:?} already registered")));
        }
        self.managers.push((name.to_string(), manager));
        self.ready = false;
        Ok(())
    }

    /// Replace a registered manager, keeping its place in the order.
    pub fn update_manager(&mut self, name: &str, manager: Box<dyn Manager>) -> Result<(), EngineError> {
        let slot = self
            .managers
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| EngineError::Registry(format!("no manager named {name:?}")))?;
        slot.1 = manager;
        self.ready = false;
        Ok(())
    }

    pub fn manager_names(&self) -> Vec<&str> {
        self.managers.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn manager<T: 'static>(&self, name: &str) -> Option<&T> {
        self.managers
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, m)| m.as_any().downcast_ref::<T>())
    }

    pub fn manager_mut<T: 'static>(&mut self, name: &str) -> Option<&mut T> {
        self.managers
            .iter_mut()
            .find(|(n, _)| n == name)
            .and_then(|(_, m)| m.as_any_mut().downcast_mut::<T>())
    }

    /// A manager together with mutable world access.
    pub fn manager_and_world<T: 'static>(&mut self, name: &str) -> Option<(&mut T, &mut World)> {
        let world = &mut self.world;
        self.managers
            .iter_mut()
            .find(|(n, _)| n == name)
            .and_then(|(_, m)| m.as_any_mut().downcast_mut::<T>())
            .map(|m| (m, world))
    }

    pub fn manager_states(&self) -> BTreeMap<String, serde_json::Value> {
        self.managers.iter().map(|(n, m)| (n.clone(), m.get_state())).collect()
    }

    pub fn set_manager_state(&mut self, name: &str, state: serde_json::Value) -> Result<(), EngineError> {
        let (_, m) = self
            .managers
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| EngineError::Registry(format!("no manager named {name:?}")))?;
        m.set_state(state)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    /// Rebuild the world: every manager resets in registration order with
    /// its own random stream forked from `seed` and its name.
    pub fn reset(&mut self, seed: u64) -> Result<&World, EngineError> {
        if !self.managers.iter().any(|(_, m)| m.provides_map()) {
            return Err(EngineError::Config("no map-providing manager registered".into()));
        }
        let mut world = World::empty();
        world.seed = seed;
        std::mem::swap(&mut self.world, &mut world);
        // keep the previous network so map managers can reuse cached maps
        self.world.net = world.net;
        for (name, m) in &mut self.managers {
            let rng = fork_named(seed, name, &[]);
            m.reset(name, &mut self.world, rng)?;
        }
        self.world.refresh();
        self.world.take_log();
        self.ready = true;
        Ok(&self.world)
    }

    /// Advance one decision step: commands, physics substeps, contact
    /// events, then spawn/recycle hooks.
    pub fn step(&mut self, actions: &BTreeMap<ObjectId, Action>) -> Result<Transition, EngineError> {
        if !self.ready {
            return Err(EngineError::NotReset);
        }
        for id in actions.keys() {
            let ok = self.world.vehicles.get(id).is_some_and(|v| v.role == Role::Agent);
            if !ok {
                return Err(EngineError::UnknownAgent(format!("object {id}")));
            }
        }
        for (_, m) in &mut self.managers {
            m.before_step(&mut self.world, actions)?;
        }
        let contacts = self.physics();
        self.world.step += 1;
        self.world.refresh();
        let mut transition = Transition {
            step: self.world.step,
            contacts,
            ..Default::default()
        };
        for (_, m) in &mut self.managers {
            m.after_step(&mut self.world, &transition)?;
        }
        self.world.refresh();
        let (spawned, despawned) = self.world.take_log();
        transition.spawned = spawned;
        transition.despawned = despawned;
        Ok(transition)
    }

    fn physics(&mut self) -> Vec<(ObjectId, ObjectId)> {
        let mut contacts = BTreeSet::new();
        let mut bodies = Vec::with_capacity(self.world.vehicles.len() + self.world.obstacles.len());
        for k in 1..=SUBSTEPS {
            let frac = k as f64 / SUBSTEPS as f64;
            for v in self.world.vehicles.values_mut() {
                if let Some((from, to, v0, v1)) = v.scripted {
                    let dh = wrap_angle(to.heading - from.heading);
                    v.state.position = from.position.lerp(to.position, frac);
                    v.state.heading = wrap_angle(from.heading + dh * frac);
                    v.state.speed = v0 + (v1 - v0) * frac;
                } else if v.active {
                    v.state = step_vehicle(&v.state, v.command, SUBSTEP);
                }
            }
            bodies.clear();
            bodies.extend(self.world.vehicles.values().map(|v| (v.id, v.state.obb())));
            bodies.extend(self.world.obstacles.values().map(|o| (o.id, o.body.obb())));
            contacts.extend(collision_check(&bodies));
        }
        for v in self.world.vehicles.values_mut() {
            v.scripted = None;
        }
        contacts.into_iter().collect()
    }
}

/// Pose helper for scripted moves.
pub(crate) fn pose_of(x: f64, y: f64, heading: f64) -> Pose {
    Pose::new(x, y, heading)
}
