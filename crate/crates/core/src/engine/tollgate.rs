use std::any::Any;
use std::collections::BTreeMap;

use super::world::World;
use super::{EngineError, Manager, ObjectId, Transition};
use crate::dynamics::DECISION_DT;
use crate::policies::GateTimer;
use crate::rng::SimRng;

/// Registry name the env looks the gate manager up by.
pub const TOLLGATE_MANAGER: &str = "tollgate";

/// Holds every agent at the toll booth until it has stood still long
/// enough. Leaving the booth early is a rule violation.
#[derive(Default)]
pub struct TollgateManager {
    timers: BTreeMap<ObjectId, GateTimer>,
}

impl TollgateManager {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn timer(&self, vehicle: ObjectId) -> GateTimer {
        self.timers.get(&vehicle).copied().unwrap_or_default()
    }

    /// In-gate and gate-blocked flags for the observation.
    pub fn observation(&self, vehicle: ObjectId) -> [f64; 2] {
        let t = self.timer(vehicle);
        [f64::from(u8::from(t.inside)), f64::from(u8::from(t.blocked()))]
    }

    pub fn violated(&self, vehicle: ObjectId) -> bool {
        self.timer(vehicle).failed
    }
}

impl Manager for TollgateManager {
    fn reset(&mut self, _name: &str, world: &mut World, _rng: SimRng) -> Result<(), EngineError> {
        self.timers.clear();
        if world.map.gates.is_empty() {
            return Err(EngineError::Config("tollgate manager on a map without gates".into()));
        }
        Ok(())
    }

    fn after_step(&mut self, world: &mut World, _transition: &Transition) -> Result<(), EngineError> {
        self.timers.retain(|id, _| world.vehicles.contains_key(id));
        for a in world.agents() {
            let inside = world.map.gates.iter().any(|g| g.contains(a.state.position));
            self.timers.entry(a.id).or_default().update(inside, a.state.speed, DECISION_DT);
        }
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::to_value(&self.timers).expect("serializable")
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        self.timers = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
