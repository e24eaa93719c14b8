use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use drivesim_core::dynamics::Action;
use drivesim_core::engine::{
    AgentManager, AgentSpawnConfig, Engine, IdmTrafficManager, MapInfo, MapManager, MapSource, PreparedMap, TrafficConfig,
};
use drivesim_core::geom::{Pose, Vec2};
use drivesim_core::policies::{idm_acceleration, pure_pursuit, throttle_for, IdmParams};
use drivesim_core::roadnet::{Centerline, Destination, Lane, LaneId, RoadNetwork, SpawnPoint, Turn};

const R: f64 = 150.0;

fn ring() -> (RoadNetwork, MapInfo) {
    let mut a = Lane::new(LaneId(0), Centerline::arc(Pose::new(0.0, -R, 0.0), R, Turn::Left, PI), 3.5);
    let mut b = Lane::new(LaneId(1), Centerline::arc(Pose::new(0.0, R, PI), R, Turn::Left, PI), 3.5);
    a.successors.push(LaneId(1));
    a.predecessors.push(LaneId(1));
    b.successors.push(LaneId(0));
    b.predecessors.push(LaneId(0));
    let net = RoadNetwork::from_lanes(vec![a, b]).unwrap();
    let lane = net.lane(LaneId(0)).unwrap();
    let slot = |s: f64| SpawnPoint {
        lane: LaneId(0),
        s,
        pose: lane.point_at(s, 0.0).unwrap(),
    };
    let mut info = MapInfo::for_lanes(&net);
    info.ego_starts = vec![slot(200.0)];
    info.destination = Some(Destination {
        lane: LaneId(1),
        s: net.lane(LaneId(1)).unwrap().length(),
    });
    info.traffic_slots = (1..10).map(|k| (None, slot(200.0 - 15.0 * k as f64))).collect();
    (net, info)
}

fn leader_action(state: &drivesim_core::dynamics::VehicleState, step: u64) -> Action {
    let p = state.position;
    let angle = p.y.atan2(p.x) + 12.0 / R;
    let target = Vec2::new(R * angle.cos(), R * angle.sin());
    let steer = pure_pursuit(state, target);
    let phase = step % 400;
    let tb = if phase < 150 {
        throttle_for(state, (12.0 - state.speed).clamp(-2.0, 2.0))
    } else {
        -1.0
    };
    Action::new(steer, tb)
}

#[test]
fn stop_and_go_platoon_never_collides() {
    let (net, info) = ring();
    let src = MapSource::Fixed(vec![Arc::new(PreparedMap { net: Arc::new(net), info })]);
    let mut e = Engine::new();
    e.register_manager("map", Box::new(MapManager::new(src))).unwrap();
    e.register_manager("agents", Box::new(AgentManager::new(AgentSpawnConfig::default())))
        .unwrap();
    let traffic = TrafficConfig {
        fixed_count: Some(9),
        lane_change: false,
        ..Default::default()
    };
    e.register_manager("traffic", Box::new(IdmTrafficManager::new(traffic))).unwrap();
    e.reset(0).unwrap();
    assert_eq!(e.world().vehicles.len(), 10);
    let ego = e.world().agents().next().unwrap().id;
    e.world_mut().vehicles.get_mut(&ego).unwrap().follower = None;
    let mut min_speed_seen = f64::INFINITY;
    for k in 0..10_000u64 {
        let state = e.world().vehicles[&ego].state;
        let t = e.step(&BTreeMap::from([(ego, leader_action(&state, k))])).unwrap();
        assert!(t.contacts.is_empty(), "contact at step {k}: {:?}", t.contacts);
        min_speed_seen = min_speed_seen.min(e.world().vehicles[&ego].state.speed);
    }
    assert!(min_speed_seen < 0.1, "leader never stopped");
    let traveled = e.world().vehicles.values().all(|v| v.state.speed.is_finite());
    assert!(traveled);
}

#[test]
fn free_road_equilibrium() {
    let p = IdmParams::default();
    for v0 in [8.0, 10.0, 12.0] {
        let q = IdmParams { desired_speed: v0, ..p };
        assert!(idm_acceleration(v0, None, &q).accel.abs() <= 1e-9);
    }
}
