use std::any::Any;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::World;
use super::{EngineError, Manager};
use crate::dynamics::{ObstacleBody, ObstacleKind};
use crate::rng::SimRng;
use crate::roadnet::{Lane, LaneKind};

/// Obstacles keep this distance from every agent spawn.
pub const OBSTACLE_CLEARANCE: f64 = 15.0;
const PLACE_TRIES: usize = 10;

/// Scatters static obstacles on road lanes. `density` is the expected
/// number of obstacles per 100 m of road lane.
pub struct ObjectManager {
    pub density: f64,
    owner: String,
}

#[derive(Serialize, Deserialize)]
struct ObjectState {
    owner: String,
    density: f64,
}

impl ObjectManager {
    pub fn new(density: f64) -> Self {
        Self {
            density,
            owner: String::new(),
        }
    }

    fn draw(&self, rng: &mut SimRng, lanes: &[&Lane], total: f64, world: &World) -> Option<ObstacleBody> {
        for _ in 0..PLACE_TRIES {
            let mut u = rng.random::<f64>() * total;
            let lane = lanes
                .iter()
                .find(|l| {
                    if u < l.length() {
                        true
                    } else {
                        u -= l.length();
                        false
                    }
                })
                .unwrap_or(lanes.last().expect("non-empty"));
            let s = u.min(lane.length());
            let kind = match rng.random_range(0..3u32) {
                0 => ObstacleKind::Cone,
                1 => ObstacleKind::Barrier,
                _ => ObstacleKind::BrokenVehicle,
            };
            let (hl, hw) = kind.footprint();
            let slack = (lane.width / 2.0 - hw / 2.0).max(0.0);
            let l = slack * (2.0 * rng.random::<f64>() - 1.0);
            let Ok(pose) = lane.point_at(s, l) else { continue };
            let body = ObstacleBody::new(kind, pose);
            // stay inside the lane along the whole footprint
            if s < hl / 2.0 || s > lane.length() - hl / 2.0 {
                continue;
            }
            let clear = world.agents().all(|a| a.state.position.distance(pose.position) >= OBSTACLE_CLEARANCE);
            if clear && world.is_free(&body.obb()) {
                return Some(body);
            }
        }
        None
    }
}

impl Manager for ObjectManager {
    fn reset(&mut self, name: &str, world: &mut World, mut rng: SimRng) -> Result<(), EngineError> {
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(EngineError::Config(format!("obstacle density must be >= 0, got {}", self.density)));
        }
        self.owner = name.to_string();
        let net = world.net.clone();
        let lanes: Vec<&Lane> = net.lanes().iter().filter(|l| l.kind == LaneKind::Road).collect();
        let total: f64 = lanes.iter().map(|l| l.length()).sum();
        let sites = (self.density * total / 100.0).round() as usize;
        if lanes.is_empty() {
            return Ok(());
        }
        for _ in 0..sites {
            if let Some(body) = self.draw(&mut rng, &lanes, total, world) {
                world.add_obstacle(&self.owner, body);
            }
        }
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::to_value(ObjectState {
            owner: self.owner.clone(),
            density: self.density,
        })
        .expect("serializable")
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        let s: ObjectState = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        self.owner = s.owner;
        self.density = s.density;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
