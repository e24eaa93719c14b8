use std::sync::Arc;

use super::*;
use crate::dynamics::{BodyClass, VehicleParams, VehicleState};
use crate::geom::Pose;
use crate::procgen::PGConfig;
use crate::roadnet::{Centerline, Lane, LaneId, RoadNetwork};
use crate::scenario_io::map_hash;

fn pg_source(n: usize, count: u64) -> MapSource {
    MapSource::Pg {
        config: PGConfig::block_num(n, count as usize, 0),
        start_seed: 0,
        num_scenarios: count,
    }
}

fn straight_map(length: f64) -> MapSource {
    let lane = Lane::new(LaneId(0), Centerline::straight(Pose::new(0.0, 0.0, 0.0), length), 3.5);
    let net = RoadNetwork::from_lanes(vec![lane]).unwrap();
    let info = MapInfo::for_lanes(&net);
    MapSource::Fixed(vec![Arc::new(PreparedMap { net: Arc::new(net), info })])
}

fn engine_with(source: MapSource) -> Engine {
    let mut e = Engine::new();
    e.register_manager("map", Box::new(MapManager::new(source))).unwrap();
    e
}

#[test]
fn registry_errors_and_order() {
    let mut e = engine_with(pg_source(1, 1));
    assert!(matches!(
        e.register_manager("map", Box::new(ObjectManager::new(0.0))),
        Err(EngineError::Registry(_))
    ));
    assert!(matches!(
        e.update_manager("nope", Box::new(ObjectManager::new(0.0))),
        Err(EngineError::Registry(_))
    ));
    e.register_manager("objects", Box::new(ObjectManager::new(0.0))).unwrap();
    e.register_manager("traffic", Box::new(ReplayTrafficManager::default())).unwrap();
    e.update_manager("traffic", Box::new(IdmTrafficManager::new(TrafficConfig::default())))
        .unwrap();
    assert_eq!(e.manager_names(), ["map", "objects", "traffic"]);
    assert!(e.manager::<IdmTrafficManager>("traffic").is_some());
}

#[test]
fn reset_needs_map_provider() {
    let mut e = Engine::new();
    e.register_manager("objects", Box::new(ObjectManager::new(0.0))).unwrap();
    assert!(matches!(e.reset(0), Err(EngineError::Config(_))));
    let mut e = engine_with(MapSource::Fixed(Vec::new()));
    assert!(matches!(e.reset(0), Err(EngineError::Config(_))));
}

#[test]
fn step_before_reset_fails() {
    let mut e = engine_with(pg_source(1, 1));
    assert!(matches!(e.step(&BTreeMap::new()), Err(EngineError::NotReset)));
}

#[test]
fn empty_world_advances_clock() {
    let mut e = engine_with(pg_source(1, 1));
    e.reset(3).unwrap();
    for k in 1..=5 {
        let t = e.step(&BTreeMap::new()).unwrap();
        assert_eq!(t.step, k);
        assert!(t.contacts.is_empty() && t.spawned.is_empty() && t.despawned.is_empty());
    }
    e.reset(3).unwrap();
    assert_eq!(e.world().step, 0);
}

#[test]
fn map_index_is_seed_mod_n() {
    let mut e = engine_with(pg_source(2, 5));
    let mut hashes = BTreeMap::new();
    for seed in 0..20u64 {
        e.reset(seed).unwrap();
        let idx = e.manager::<MapManager>("map").unwrap().current_index().unwrap();
        assert_eq!(idx, seed % 5);
        let h = map_hash(&e.world().net);
        assert_eq!(*hashes.entry(idx).or_insert_with(|| h.clone()), h);
    }
    let distinct: std::collections::BTreeSet<_> = hashes.values().collect();
    assert_eq!(distinct.len(), 5);
}

#[test]
fn start_seed_offsets_the_index() {
    let src = MapSource::Pg {
        config: PGConfig::block_num(1, 4, 0),
        start_seed: 100,
        num_scenarios: 4,
    };
    assert_eq!(src.map_index(100).unwrap(), 100);
    assert_eq!(src.map_index(105).unwrap(), 101);
}

fn full_stack(traffic: TrafficConfig, obstacles: f64) -> Engine {
    let mut e = engine_with(pg_source(3, 10));
    e.register_manager("agents", Box::new(AgentManager::new(AgentSpawnConfig::default())))
        .unwrap();
    e.register_manager("traffic", Box::new(IdmTrafficManager::new(traffic))).unwrap();
    e.register_manager("objects", Box::new(ObjectManager::new(obstacles))).unwrap();
    e
}

#[test]
fn same_seed_same_world() {
    let mut a = full_stack(TrafficConfig::default(), 0.5);
    let mut b = full_stack(TrafficConfig::default(), 0.5);
    for seed in [0, 7] {
        a.reset(seed).unwrap();
        b.reset(seed).unwrap();
        assert_eq!(map_hash(&a.world().net), map_hash(&b.world().net));
        assert_eq!(a.world().snapshot(), b.world().snapshot());
        assert_eq!(a.manager_states(), b.manager_states());
    }
}

#[test]
fn density_zero_means_no_traffic_or_obstacles() {
    let cfg = TrafficConfig {
        density: 0.0,
        ..Default::default()
    };
    let mut e = full_stack(cfg, 0.0);
    e.reset(1).unwrap();
    assert_eq!(e.world().vehicles.len(), 1);
    assert!(e.world().obstacles.is_empty());
}

#[test]
fn respawn_count_follows_density() {
    let mut e = engine_with(straight_map(100.0));
    let cfg = TrafficConfig {
        density: 1.0,
        ..Default::default()
    };
    e.register_manager("traffic", Box::new(IdmTrafficManager::new(cfg))).unwrap();
    e.reset(0).unwrap();
    assert_eq!(e.world().vehicles.len(), 10);
}

#[test]
fn no_overlap_at_reset() {
    let cfg = TrafficConfig {
        density: 0.3,
        ..Default::default()
    };
    let mut e = full_stack(cfg, 1.0);
    for seed in 0..100 {
        let w = e.reset(seed).unwrap();
        let bodies: Vec<_> = w
            .vehicles
            .values()
            .map(|v| (v.id, v.state.obb()))
            .chain(w.obstacles.values().map(|o| (o.id, o.body.obb())))
            .collect();
        assert!(collision_check(&bodies).is_empty(), "seed {seed}");
    }
}

#[test]
fn obstacles_stay_on_the_road_and_clear_of_ego() {
    let cfg = TrafficConfig {
        density: 0.0,
        ..Default::default()
    };
    let mut e = full_stack(cfg, 2.0);
    for seed in 0..100 {
        let w = e.reset(seed).unwrap();
        assert!(!w.obstacles.is_empty());
        let ego = w.agents().next().unwrap().state.position;
        for o in w.obstacles.values() {
            let f = o.frenet.expect("on network");
            let lane = w.net.lane(f.lane).unwrap();
            assert!(f.l.abs() <= lane.width / 2.0, "seed {seed}: l = {}", f.l);
            assert!(o.body.pose.position.distance(ego) >= OBSTACLE_CLEARANCE);
        }
    }
}

#[test]
fn trigger_traffic_waits_then_moves() {
    let cfg = TrafficConfig {
        mode: TrafficMode::Trigger,
        density: 0.5,
        ..Default::default()
    };
    let mut e = full_stack(cfg, 0.0);
    e.reset(2).unwrap();
    let traffic: Vec<ObjectId> = e
        .world()
        .vehicles
        .values()
        .filter(|v| v.role == Role::Traffic)
        .map(|v| v.id)
        .collect();
    assert!(!traffic.is_empty());
    for id in &traffic {
        let v = &e.world().vehicles[id];
        assert_eq!(v.state.speed, 0.0);
        assert!(!v.active);
    }
    // teleport the ego into the first appended block's zone
    let zone = e.world().map.trigger_zones[&1];
    let block_lane = LaneId(e.world().net.blocks()[1].first_lane);
    let pose = e.world().net.lane(block_lane).unwrap().point_at(1.0, 0.0).unwrap();
    assert!(zone.contains(pose.position));
    let ego = e.world().agents().next().unwrap().id;
    {
        let w = e.world_mut();
        let v = w.vehicles.get_mut(&ego).unwrap();
        v.state.position = pose.position;
        v.state.heading = pose.heading;
        v.follower = None;
    }
    let waiting_in_block: Vec<ObjectId> = e
        .manager::<IdmTrafficManager>("traffic")
        .unwrap()
        .waiting()
        .iter()
        .filter(|(_, b)| **b == 1)
        .map(|(id, _)| *id)
        .collect();
    let t = e.step(&BTreeMap::from([(ego, Action::ZERO)])).unwrap();
    assert_eq!(t.step, 1);
    for id in &waiting_in_block {
        assert!(e.world().vehicles[id].active);
    }
    let still: Vec<_> = e.manager::<IdmTrafficManager>("traffic").unwrap().waiting().values().copied().collect();
    assert!(still.iter().all(|b| *b != 1));
}

#[test]
fn missing_and_unknown_actions() {
    let mut e = full_stack(TrafficConfig::default(), 0.0);
    e.reset(0).unwrap();
    assert!(matches!(e.step(&BTreeMap::new()), Err(EngineError::MissingAction(n)) if n == "agent0"));
    let traffic = e.world().vehicles.values().find(|v| v.role == Role::Traffic).unwrap().id;
    assert!(matches!(
        e.step(&BTreeMap::from([(traffic, Action::ZERO)])),
        Err(EngineError::UnknownAgent(_))
    ));
}

#[test]
fn respawn_recycling_conserves_count() {
    let cfg = TrafficConfig {
        density: 0.2,
        idm: crate::policies::IdmParams {
            desired_speed: 15.0,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut e = engine_with(pg_source(2, 3));
    e.register_manager("traffic", Box::new(IdmTrafficManager::new(cfg))).unwrap();
    e.reset(4).unwrap();
    let n = e.world().vehicles.len();
    assert!(n > 0);
    let ids: std::collections::BTreeSet<ObjectId> = e.world().vehicles.keys().copied().collect();
    let mut recycled = 0;
    for _ in 0..600 {
        let before: BTreeMap<ObjectId, Pose> = e.world().vehicles.iter().map(|(k, v)| (*k, v.state.pose())).collect();
        e.step(&BTreeMap::new()).unwrap();
        assert_eq!(e.world().vehicles.len(), n);
        for (id, v) in &e.world().vehicles {
            if before[id].position.distance(v.state.position) > 10.0 {
                recycled += 1;
            }
        }
    }
    assert!(recycled > 0);
    let after: std::collections::BTreeSet<ObjectId> = e.world().vehicles.keys().copied().collect();
    assert_eq!(ids, after);
}

#[test]
fn manager_state_round_trips() {
    let mut e = full_stack(TrafficConfig::default(), 0.3);
    e.reset(5).unwrap();
    let states = e.manager_states();
    for (name, s) in &states {
        e.set_manager_state(name, s.clone()).unwrap();
    }
    assert_eq!(e.manager_states(), states);
}

#[test]
fn replay_follows_the_log() {
    use crate::policies::{LogPose, Track, TrajectoryLog};
    let lane = Lane::new(LaneId(0), Centerline::straight(Pose::new(0.0, 0.0, 0.0), 200.0), 3.5);
    let net = RoadNetwork::from_lanes(vec![lane]).unwrap();
    let mut info = MapInfo::for_lanes(&net);
    let poses = |x0: f64, n: usize| {
        (0..n)
            .map(|k| LogPose {
                x: x0 + k as f64,
                y: 0.0,
                heading: 0.0,
                speed: 10.0,
            })
            .collect()
    };
    info.tracks = Some(Arc::new(TrajectoryLog {
        tick: crate::policies::LOG_TICK,
        tracks: vec![
            Track {
                id: "a".into(),
                start_tick: 0,
                poses: poses(10.0, 30),
            },
            Track {
                id: "b".into(),
                start_tick: 5,
                poses: poses(100.0, 10),
            },
        ],
    }));
    let src = MapSource::Fixed(vec![Arc::new(PreparedMap { net: Arc::new(net), info })]);
    let mut e = engine_with(src);
    e.register_manager("replay", Box::new(ReplayTrafficManager::default())).unwrap();
    e.reset(0).unwrap();
    assert_eq!(e.world().vehicles.len(), 1);
    let mut seen_b = false;
    for k in 1..=20u64 {
        let t = e.step(&BTreeMap::new()).unwrap();
        let live = e.manager::<ReplayTrafficManager>("replay").unwrap().live().clone();
        let a = &e.world().vehicles[&live["a"]];
        assert_eq!(a.state.position.x, 10.0 + k as f64);
        if k == 5 {
            assert_eq!(t.spawned.len(), 1);
        }
        if let Some(b) = live.get("b") {
            seen_b = true;
            let x = e.world().vehicles[b].state.position.x;
            assert_eq!(x, 100.0 + (k - 5) as f64);
        }
        if k == 15 {
            assert_eq!(t.despawned.len(), 1);
        }
    }
    assert!(seen_b);
}

#[test]
fn straddling_vehicle_blocks_both_lanes() {
    let mut right = Lane::new(LaneId(0), Centerline::straight(Pose::new(0.0, 0.0, 0.0), 100.0), 3.5);
    let mut left = Lane::new(LaneId(1), Centerline::straight(Pose::new(0.0, 3.5, 0.0), 100.0), 3.5);
    right.left_neighbor = Some(LaneId(1));
    left.right_neighbor = Some(LaneId(0));
    let net = RoadNetwork::from_lanes(vec![right, left]).unwrap();
    let mut w = World::empty();
    w.net = Arc::new(net);
    let id = w.spawn_vehicle(
        "t",
        Role::Traffic,
        VehicleState::new(Pose::new(50.0, 1.5, 0.0), 0.0, VehicleParams::default(), BodyClass::Traffic),
    );
    w.refresh();
    assert_eq!(w.occupants(LaneId(0))[0].id, id);
    assert_eq!(w.occupants(LaneId(1))[0].id, id);
}
