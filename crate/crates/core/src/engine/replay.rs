use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::world::{Role, World};
use super::{pose_of, EngineError, Manager, ObjectId, Transition};
use crate::dynamics::{Action, BodyClass, DECISION_DT, VehicleParams, VehicleState};
use crate::policies::{replay_step, LogPose};
use crate::rng::SimRng;

/// Moves vehicles along the map's logged tracks. Decision step `k` ends at
/// log time `k * 0.1 s`.
pub struct ReplayTrafficManager {
    pub params: VehicleParams,
    owner: String,
    live: BTreeMap<String, ObjectId>,
}

#[derive(Serialize, Deserialize)]
struct ReplayState {
    owner: String,
    live: BTreeMap<String, ObjectId>,
}

impl Default for ReplayTrafficManager {
    fn default() -> Self {
        Self::new(VehicleParams::default())
    }
}

impl ReplayTrafficManager {
    pub fn new(params: VehicleParams) -> Self {
        Self {
            params,
            owner: String::new(),
            live: BTreeMap::new(),
        }
    }

    /// Track id to vehicle id of every replayed vehicle.
    pub fn live(&self) -> &BTreeMap<String, ObjectId> {
        &self.live
    }

    fn sync(&mut self, world: &mut World, step: u64) -> Result<(), EngineError> {
        let Some(log) = world.map.tracks.clone() else {
            return Err(EngineError::Config("replay traffic needs logged tracks".into()));
        };
        let now: BTreeMap<&str, LogPose> = replay_step(&log, step as f64 * DECISION_DT).into_iter().collect();
        let gone: Vec<String> = self.live.keys().filter(|k| !now.contains_key(k.as_str())).cloned().collect();
        for k in gone {
            let id = self.live.remove(&k).expect("listed");
            world.despawn(id);
        }
        let alive: BTreeSet<&str> = self.live.keys().map(String::as_str).collect();
        let fresh: Vec<(String, LogPose)> = now
            .iter()
            .filter(|(k, _)| !alive.contains(*k))
            .map(|(k, p)| (k.to_string(), *p))
            .collect();
        for (k, p) in fresh {
            let state = VehicleState::new(pose_of(p.x, p.y, p.heading), p.speed, self.params, BodyClass::Traffic);
            let id = world.spawn_vehicle(&self.owner, Role::Replay, state);
            let v = world.vehicles.get_mut(&id).expect("spawned");
            v.active = false;
            v.tag = Some(k.clone());
            self.live.insert(k, id);
        }
        Ok(())
    }
}

impl Manager for ReplayTrafficManager {
    fn reset(&mut self, name: &str, world: &mut World, _rng: SimRng) -> Result<(), EngineError> {
        self.owner = name.to_string();
        self.live.clear();
        self.sync(world, 0)
    }

    fn before_step(&mut self, world: &mut World, _actions: &BTreeMap<ObjectId, Action>) -> Result<(), EngineError> {
        let Some(log) = world.map.tracks.clone() else {
            return Ok(());
        };
        let next = (world.step + 1) as f64 * DECISION_DT;
        for (k, p) in replay_step(&log, next) {
            let Some(id) = self.live.get(k) else { continue };
            let v = world.vehicles.get_mut(id).expect("live vehicle");
            let from = v.state.pose();
            v.scripted = Some((from, pose_of(p.x, p.y, p.heading), v.state.speed, p.speed));
        }
        Ok(())
    }

    fn after_step(&mut self, world: &mut World, _transition: &Transition) -> Result<(), EngineError> {
        let step = world.step;
        self.sync(world, step)
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::to_value(ReplayState {
            owner: self.owner.clone(),
            live: self.live.clone(),
        })
        .expect("serializable")
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        let s: ReplayState = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        self.owner = s.owner;
        self.live = s.live;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
