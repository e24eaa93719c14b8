use std::any::Any;
use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::world::World;
use super::{EngineError, Manager};
use crate::geom::{Aabb, Obb, Segment};
use crate::policies::TrajectoryLog;
use crate::procgen::{build_map, PGConfig};
use crate::rng::SimRng;
use crate::roadnet::{lane_slots, BlockType, Destination, LaneKind, RoadNetwork, SpawnPoint};

/// Spawn and goal information that comes with a map.
#[derive(Clone, Debug, Default)]
pub struct MapInfo {
    /// Candidate ego spawns for single-agent scenes.
    pub ego_starts: Vec<SpawnPoint>,
    /// Goal of the single-agent route.
    pub destination: Option<Destination>,
    /// Candidate agent spawns for multi-agent scenes.
    pub agent_slots: Vec<SpawnPoint>,
    /// Candidate goals for multi-agent scenes.
    pub exits: Vec<Destination>,
    /// Traffic slots tagged with the owning block (None for imported maps).
    pub traffic_slots: Vec<(Option<usize>, SpawnPoint)>,
    /// Trigger region per block index.
    pub trigger_zones: BTreeMap<usize, Aabb>,
    pub gates: Vec<Obb>,
    pub sidewalks: Arc<Vec<Segment>>,
    pub tracks: Option<Arc<TrajectoryLog>>,
    pub map_index: Option<usize>,
}

fn sidewalks(net: &RoadNetwork) -> Vec<Segment> {
    let mut out = Vec::new();
    for lane in net.lanes() {
        if lane.kind != LaneKind::Road || lane.right_neighbor.is_some() {
            continue;
        }
        let [_, right] = lane.boundaries(2.0);
        out.extend(right.windows(2).map(|w| Segment::new(w[0], w[1])));
    }
    out
}

/// Slots on every road lane of `net`, in lane order.
pub(crate) fn all_slots(net: &RoadNetwork) -> Vec<SpawnPoint> {
    let mut out = Vec::new();
    for lane in net.lanes() {
        for s in lane_slots(lane) {
            if let Ok(pose) = lane.point_at(s, 0.0) {
                out.push(SpawnPoint { lane: lane.id, s, pose });
            }
        }
    }
    out
}

impl MapInfo {
    /// Info for a procedurally generated network.
    pub fn for_pg(net: &RoadNetwork) -> Self {
        let mut info = MapInfo {
            destination: net.destination().or_else(|| net.default_destination()),
            sidewalks: Arc::new(sidewalks(net)),
            ..Default::default()
        };
        if let Some(root) = net.blocks().first() {
            if root.block_type == BlockType::FirstBlock {
                for id in &root.sockets[0].outgoing {
                    let lane = net.lane(*id).expect("root lane");
                    let s = 10f64.min(lane.length() / 2.0);
                    info.ego_starts.push(SpawnPoint {
                        lane: *id,
                        s,
                        pose: lane.point_at(s, 0.0).expect("in range"),
                    });
                }
            }
        }
        for (bi, block) in net.blocks().iter().enumerate() {
            for sp in &block.spawn_points {
                info.traffic_slots.push((Some(bi), *sp));
            }
            let zone = block
                .lane_ids()
                .filter_map(|id| net.lane(id).ok())
                .fold(Aabb::EMPTY, |b, l| b.union(l.bounds()));
            info.trigger_zones.insert(bi, zone);
        }
        info.agent_slots = info.traffic_slots.iter().map(|(_, s)| *s).collect();
        // exits: lanes leaving the map through open sockets or the root's far end
        let mut exits: Vec<Destination> = Vec::new();
        for socket in net.open_sockets() {
            for id in &socket.outgoing {
                let lane = net.lane(*id).expect("socket lane");
                exits.push(Destination { lane: *id, s: lane.length() });
            }
        }
        if let Some(root) = net.blocks().first() {
            for id in root.lane_ids() {
                let lane = net.lane(id).expect("root lane");
                if lane.successors.is_empty() {
                    exits.push(Destination { lane: id, s: lane.length() });
                }
            }
        }
        exits.sort_by_key(|d| d.lane);
        exits.dedup_by_key(|d| d.lane);
        info.exits = exits;
        info
    }

    /// Info for a hand-built or imported network: every road slot can hold
    /// traffic or agents, dead-end lanes are exits.
    pub fn for_lanes(net: &RoadNetwork) -> Self {
        let slots = all_slots(net);
        let exits = net
            .lanes()
            .iter()
            .filter(|l| l.successors.is_empty())
            .map(|l| Destination { lane: l.id, s: l.length() })
            .collect();
        MapInfo {
            destination: net.destination(),
            agent_slots: slots.clone(),
            traffic_slots: slots.into_iter().map(|s| (None, s)).collect(),
            exits,
            sidewalks: Arc::new(sidewalks(net)),
            ..Default::default()
        }
    }
}

/// A ready-to-use map.
#[derive(Clone, Debug)]
pub struct PreparedMap {
    pub net: Arc<RoadNetwork>,
    pub info: MapInfo,
}

#[derive(Clone, Debug)]
pub enum MapSource {
    /// Procedural training set: env seed `k` uses map index
    /// `start_seed + (k - start_seed) mod num_scenarios`.
    Pg {
        config: PGConfig,
        start_seed: u64,
        num_scenarios: u64,
    },
    /// Fixed maps, chosen by `seed mod len`.
    Fixed(Vec<Arc<PreparedMap>>),
}

impl MapSource {
    pub fn map_index(&self, seed: u64) -> Result<u64, EngineError> {
        match self {
            MapSource::Pg {
                start_seed,
                num_scenarios,
                ..
            } => {
                if *num_scenarios == 0 {
                    return Err(EngineError::Config("empty map set".into()));
                }
                Ok(start_seed + seed.wrapping_sub(*start_seed) % num_scenarios)
            }
            MapSource::Fixed(maps) => {
                if maps.is_empty() {
                    return Err(EngineError::Config("empty map set".into()));
                }
                Ok(seed % maps.len() as u64)
            }
        }
    }
}

/// Installs the road network on reset.
pub struct MapManager {
    source: MapSource,
    cache: BTreeMap<u64, Arc<PreparedMap>>,
    current: Option<u64>,
}

impl MapManager {
    pub fn new(source: MapSource) -> Self {
        Self {
            source,
            cache: BTreeMap::new(),
            current: None,
        }
    }

    pub fn source(&self) -> &MapSource {
        &self.source
    }

    pub fn current_index(&self) -> Option<u64> {
        self.current
    }

    /// Map for an env seed, building and caching it on first use.
    pub fn prepared(&mut self, seed: u64) -> Result<Arc<PreparedMap>, EngineError> {
        let index = self.source.map_index(seed)?;
        if let Some(m) = self.cache.get(&index) {
            return Ok(m.clone());
        }
        let m = match &self.source {
            MapSource::Pg { config, .. } => {
                let net = build_map(config, index as usize)?;
                let mut info = MapInfo::for_pg(&net);
                info.map_index = Some(index as usize);
                Arc::new(PreparedMap { net: Arc::new(net), info })
            }
            MapSource::Fixed(maps) => maps[index as usize].clone(),
        };
        self.cache.insert(index, m.clone());
        Ok(m)
    }
}

impl Manager for MapManager {
    fn provides_map(&self) -> bool {
        true
    }

    fn reset(&mut self, _name: &str, world: &mut World, _rng: SimRng) -> Result<(), EngineError> {
        let m = self.prepared(world.seed)?;
        self.current = Some(self.source.map_index(world.seed)?);
        world.net = m.net.clone();
        world.map = m.info.clone();
        Ok(())
    }

    fn get_state(&self) -> serde_json::Value {
        serde_json::json!({ "map_index": self.current })
    }

    fn set_state(&mut self, state: serde_json::Value) -> Result<(), EngineError> {
        #[derive(Deserialize, Serialize)]
        struct S {
            map_index: Option<u64>,
        }
        let s: S = serde_json::from_value(state).map_err(|e| EngineError::State(e.to_string()))?;
        self.current = s.map_index;
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }

    fn as_any_mut(&mut self) -> &mut dyn Any {
        self
    }
}
