use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::map::MapInfo;
use super::ObjectId;
use crate::dynamics::{Action, ObstacleBody, VehicleState};
use crate::geom::{Obb, Pose};
use crate::policies::{IdmParams, LaneFollower};
use crate::roadnet::{Frenet, LaneId, RoadNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Driven by an external action channel.
    Agent,
    Traffic,
    /// Moved along a logged trajectory.
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vehicle {
    pub id: ObjectId,
    pub owner: String,
    pub role: Role,
    pub state: VehicleState,
    /// Idle vehicles keep their pose (trigger-mode traffic before release).
    pub active: bool,
    pub command: Action,
    pub follower: Option<LaneFollower>,
    pub idm: IdmParams,
    pub frenet: Option<Frenet>,
    /// Start and end pose plus speeds of a scripted move this step.
    #[serde(skip)]
    pub scripted: Option<(Pose, Pose, f64, f64)>,
    /// Steps before another lane change is allowed.
    pub cooldown: u32,
    pub tag: Option<String>,
}

impl Vehicle {
    pub fn new(id: ObjectId, owner: &str, role: Role, state: VehicleState) -> Self {
        Self {
            id,
            owner: owner.to_string(),
            role,
            state,
            active: true,
            command: Action::ZERO,
            follower: None,
            idm: IdmParams::default(),
            frenet: None,
            scripted: None,
            cooldown: 0,
            tag: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: ObjectId,
    pub owner: String,
    pub body: ObstacleBody,
    pub frenet: Option<Frenet>,
}

/// A body registered on a lane for car-following queries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Occupant {
    pub s: f64,
    pub id: ObjectId,
    pub half_length: f64,
    pub speed: f64,
}

/// Everything the managers act on.
#[derive(Clone, Debug)]
pub struct World {
    pub net: Arc<RoadNetwork>,
    pub map: MapInfo,
    pub vehicles: BTreeMap<ObjectId, Vehicle>,
    pub obstacles: BTreeMap<ObjectId, Obstacle>,
    pub step: u64,
    pub seed: u64,
    next_id: ObjectId,
    lane_index: BTreeMap<LaneId, Vec<Occupant>>,
    spawned: Vec<ObjectId>,
    despawned: Vec<ObjectId>,
}

impl World {
    pub fn empty() -> Self {
        Self {
            net: Arc::new(RoadNetwork::from_lanes(Vec::new()).expect("empty network")),
            map: MapInfo::default(),
            vehicles: BTreeMap::new(),
            obstacles: BTreeMap::new(),
            step: 0,
            seed: 0,
            next_id: 0,
            lane_index: BTreeMap::new(),
            spawned: Vec::new(),
            despawned: Vec::new(),
        }
    }

    fn fresh_id(&mut self) -> ObjectId {
        let id = self.next_id;
        self.next_id += 1;
        self.spawned.push(id);
        id
    }

    pub fn spawn_vehicle(&mut self, owner: &str, role: Role, state: VehicleState) -> ObjectId {
        let id = self.fresh_id();
        let mut v = Vehicle::new(id, owner, role, state);
        v.frenet = self.net.world_to_frenet(state.position, None).ok();
        self.vehicles.insert(id, v);
        id
    }

    pub fn add_obstacle(&mut self, owner: &str, body: ObstacleBody) -> ObjectId {
        let id = self.fresh_id();
        let frenet = self.net.world_to_frenet(body.pose.position, None).ok();
        self.obstacles.insert(
            id,
            Obstacle {
                id,
                owner: owner.to_string(),
                body,
                frenet,
            },
        );
        id
    }

    pub fn despawn(&mut self, id: ObjectId) -> bool {
        let gone = self.vehicles.remove(&id).is_some() || self.obstacles.remove(&id).is_some();
        if gone {
            self.despawned.push(id);
        }
        gone
    }

    pub(crate) fn take_log(&mut self) -> (Vec<ObjectId>, Vec<ObjectId>) {
        (std::mem::take(&mut self.spawned), std::mem::take(&mut self.despawned))
    }

    pub fn agents(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.values().filter(|v| v.role == Role::Agent)
    }

    /// Oriented boxes of every body except `skip`.
    pub fn obbs_except(&self, skip: ObjectId) -> Vec<Obb> {
        self.vehicles
            .values()
            .filter(|v| v.id != skip)
            .map(|v| v.state.obb())
            .chain(self.obstacles.values().map(|o| o.body.obb()))
            .collect()
    }

    /// Whether a box would overlap any existing body.
    pub fn is_free(&self, obb: &Obb) -> bool {
        self.vehicles.values().all(|v| !v.state.obb().overlaps(obb)) && self.obstacles.values().all(|o| !o.body.obb().overlaps(obb))
    }

    /// Re-localize every vehicle and rebuild the per-lane occupancy index.
    pub fn refresh(&mut self) {
        let net = self.net.clone();
        for v in self.vehicles.values_mut() {
            v.frenet = match v.follower.as_mut() {
                Some(f) => f.localize(&net, v.state.position).ok().map(|_| Frenet {
                    lane: f.lane,
                    s: f.s,
                    l: f.l,
                }),
                None => net.world_to_frenet(v.state.position, v.frenet.map(|f| f.lane)).ok(),
            };
        }
        self.lane_index.clear();
        let mut push = |lane: LaneId, occ: Occupant| self.lane_index.entry(lane).or_default().push(occ);
        for v in self.vehicles.values() {
            let Some(f) = v.frenet else { continue };
            let Ok(lane) = net.lane(f.lane) else { continue };
            let occ = Occupant {
                s: f.s,
                id: v.id,
                half_length: v.state.params.length / 2.0,
                speed: v.state.speed,
            };
            push(f.lane, occ);
            // a body straddling the lane edge also blocks the neighbor lane
            let reach = f.l.abs() + v.state.params.width / 2.0;
            if reach > lane.width / 2.0 {
                let side = if f.l > 0.0 { lane.left_neighbor } else { lane.right_neighbor };
                if let Some(n) = side.and_then(|n| net.lane(n).ok()) {
                    push(n.id, Occupant { s: f.s / lane.length() * n.length(), ..occ });
                }
            }
        }
        for o in self.obstacles.values() {
            let Some(f) = o.frenet else { continue };
            let Ok(lane) = net.lane(f.lane) else { continue };
            let occ = Occupant {
                s: f.s,
                id: o.id,
                half_length: o.body.half_length.max(o.body.half_width),
                speed: 0.0,
            };
            push(f.lane, occ);
            let reach = f.l.abs() + o.body.half_width;
            if reach > lane.width / 2.0 {
                let side = if f.l > 0.0 { lane.left_neighbor } else { lane.right_neighbor };
                if let Some(n) = side.and_then(|n| net.lane(n).ok()) {
                    push(n.id, Occupant { s: f.s / lane.length() * n.length(), ..occ });
                }
            }
        }
        for occ in self.lane_index.values_mut() {
            occ.sort_by(|a, b| a.s.total_cmp(&b.s).then(a.id.cmp(&b.id)));
        }
    }

    pub fn occupants(&self, lane: LaneId) -> &[Occupant] {
        self.lane_index.get(&lane).map_or(&[], |v| v.as_slice())
    }

    /// Serializable snapshot of all bodies, for hashing and inspection.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::json!({
            "step": self.step,
            "vehicles": self.vehicles,
            "obstacles": self.obstacles,
        })
    }
}
