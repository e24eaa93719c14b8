//! Hand-built maps for the multi-agent scenes and the replay scene.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::{MapInfo, PreparedMap};
use crate::geom::{Obb, Pose, Vec2};
use crate::policies::{LogPose, Track, TrajectoryLog, LOG_TICK};
use crate::roadnet::{
    crossover_test, dock_socket, lane_slots, Block, BlockType, Centerline, Destination, Lane, LaneId, LineType, Polyline,
    RoadNetwork, RoadSpec, SpawnPoint, Turn,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Roundabout,
    Intersection,
    Tollgate,
    Bottleneck,
    ParkingLot,
    /// Straight highway with logged traffic.
    ReplayHighway,
}

impl Layout {
    pub fn build(self) -> PreparedMap {
        match self {
            Layout::Roundabout => junction_layout(BlockType::Roundabout, &[30.0, 20.0, 30.0]),
            Layout::Intersection => junction_layout(BlockType::Intersection, &[12.0, 30.0]),
            Layout::Tollgate => tollgate(),
            Layout::Bottleneck => bottleneck(),
            Layout::ParkingLot => parking_lot(),
            Layout::ReplayHighway => replay_highway(),
        }
    }
}

/// Gate region along the toll road.
pub const GATE_LENGTH: f64 = 8.0;

fn attach(net: &mut RoadNetwork, t: BlockType, params: &[f64], socket: usize) {
    let road = *net.road().expect("block network");
    let block = Block::build(t, params, &road).expect("layout parameters are valid");
    let own = block.entry_index().expect("entry socket");
    let docked = dock_socket(&block, own, &net.open_sockets()[socket]).expect("layout docks");
    assert!(!crossover_test(net, &docked), "layout blocks overlap");
    net.append(docked, socket).expect("layout appends");
}

fn finish(net: RoadNetwork) -> PreparedMap {
    let info = MapInfo::for_pg(&net);
    PreparedMap {
        net: Arc::new(net),
        info,
    }
}

/// A junction with a straight road on every arm.
fn junction_layout(t: BlockType, params: &[f64]) -> PreparedMap {
    let road = RoadSpec {
        lanes_per_direction: 2,
        lane_width: 3.5,
    };
    let mut net = RoadNetwork::first_block(road);
    attach(&mut net, t, params, 0);
    let arms = net.open_sockets().len();
    for _ in 0..arms {
        // new sockets go to the back, so the next junction arm is at 0
        attach(&mut net, BlockType::Straight, &[80.0], 0);
    }
    finish(net)
}

fn tollgate() -> PreparedMap {
    let road = RoadSpec {
        lanes_per_direction: 3,
        lane_width: 3.5,
    };
    let mut net = RoadNetwork::first_block(road);
    attach(&mut net, BlockType::Straight, &[80.0], 0);
    attach(&mut net, BlockType::Straight, &[40.0], 0);
    attach(&mut net, BlockType::Straight, &[80.0], 0);
    let joint = net.blocks()[2].joint.clone().expect("appended block has a joint");
    let dir = joint.anchor.direction();
    let center = joint.anchor.position + dir * 20.0;
    let gate = Obb::new(center, joint.anchor.heading, GATE_LENGTH, 2.0 * road.half_width());
    let mut m = finish(net);
    m.info.agent_slots.retain(|s| !gate.contains(s.pose.position));
    m.info.gates = vec![gate];
    m
}

/// Points every metre along a straight run, excluding the end point.
fn run(a: Vec2, b: Vec2) -> Vec<Vec2> {
    let n = (a.distance(b).ceil() as usize).max(1);
    (0..n).map(|k| a.lerp(b, k as f64 / n as f64)).collect()
}

/// Smooth lateral shift from `a` to `b` along x, every metre.
fn shift(a: Vec2, b: Vec2) -> Vec<Vec2> {
    let n = ((b.x - a.x).abs().ceil() as usize).max(1);
    (0..n)
        .map(|k| {
            let f = k as f64 / n as f64;
            let w = (1.0 - (PI * f).cos()) / 2.0;
            Vec2::new(a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * w)
        })
        .collect()
}

fn lane(id: u32, mut pts: Vec<Vec2>, end: Vec2) -> Lane {
    pts.push(end);
    let poly = Polyline::new(pts).expect("layout polyline");
    let mut l = Lane::new(LaneId(id), Centerline::Polyline(poly), 3.5);
    l.left_line = LineType::Broken;
    l.right_line = LineType::Broken;
    l
}

fn link(lanes: &mut [Lane], from: u32, to: u32) {
    lanes[from as usize].successors.push(LaneId(to));
    lanes[to as usize].predecessors.push(LaneId(from));
}

fn side_by_side(lanes: &mut [Lane], ids: &[u32]) {
    for w in ids.windows(2) {
        lanes[w[0] as usize].left_neighbor = Some(LaneId(w[1]));
        lanes[w[1] as usize].right_neighbor = Some(LaneId(w[0]));
    }
    lanes[ids[0] as usize].right_line = LineType::Continuous;
    lanes[*ids.last().unwrap() as usize].left_line = LineType::Continuous;
}

fn slots_of(net: &RoadNetwork, ids: &[u32], max_s: f64) -> Vec<SpawnPoint> {
    let mut out = Vec::new();
    for id in ids {
        let l = net.lane(LaneId(*id)).expect("layout lane");
        for s in lane_slots(l).into_iter().filter(|s| *s <= max_s) {
            out.push(SpawnPoint {
                lane: l.id,
                s,
                pose: l.point_at(s, 0.0).expect("in range"),
            });
        }
    }
    out
}

/// One-way road narrowing from four lanes to two and widening again.
fn bottleneck() -> PreparedMap {
    let y = [-5.25, -1.75, 1.75, 5.25];
    let p = |x: f64, y: f64| Vec2::new(x, y);
    let mut lanes = vec![
        // entry section, x in [0, 150]; outer lanes taper over the last 30 m
        lane(0, [run(p(0.0, y[0]), p(120.0, y[0])), shift(p(120.0, y[0]), p(150.0, y[1]))].concat(), p(150.0, y[1])),
        lane(1, run(p(0.0, y[1]), p(150.0, y[1])), p(150.0, y[1])),
        lane(2, run(p(0.0, y[2]), p(150.0, y[2])), p(150.0, y[2])),
        lane(3, [run(p(0.0, y[3]), p(120.0, y[3])), shift(p(120.0, y[3]), p(150.0, y[2]))].concat(), p(150.0, y[2])),
        // narrow section
        lane(4, run(p(150.0, y[1]), p(210.0, y[1])), p(210.0, y[1])),
        lane(5, run(p(150.0, y[2]), p(210.0, y[2])), p(210.0, y[2])),
        // exit section
        lane(6, [shift(p(210.0, y[1]), p(240.0, y[0])), run(p(240.0, y[0]), p(310.0, y[0]))].concat(), p(310.0, y[0])),
        lane(7, run(p(210.0, y[1]), p(310.0, y[1])), p(310.0, y[1])),
        lane(8, run(p(210.0, y[2]), p(310.0, y[2])), p(310.0, y[2])),
        lane(9, [shift(p(210.0, y[2]), p(240.0, y[3])), run(p(240.0, y[3]), p(310.0, y[3]))].concat(), p(310.0, y[3])),
    ];
    for (a, b) in [(0, 4), (1, 4), (2, 5), (3, 5), (4, 6), (4, 7), (5, 8), (5, 9)] {
        link(&mut lanes, a, b);
    }
    side_by_side(&mut lanes, &[0, 1, 2, 3]);
    side_by_side(&mut lanes, &[4, 5]);
    side_by_side(&mut lanes, &[6, 7, 8, 9]);
    let net = RoadNetwork::from_lanes(lanes).expect("bottleneck topology");
    let mut info = MapInfo::for_lanes(&net);
    info.agent_slots = slots_of(&net, &[0, 1, 2, 3], 110.0);
    info.traffic_slots = info.agent_slots.iter().map(|s| (None, *s)).collect();
    PreparedMap {
        net: Arc::new(net),
        info,
    }
}

/// Quarter turn of radius 6 m into a parking bay, then 6 m of bay.
fn bay(start: Pose, turn: Turn) -> Vec<Vec2> {
    let arc = Centerline::arc(start, 6.0, turn, FRAC_PI_2);
    let mut pts = arc.sample_points(1.0);
    let end = arc.point_at(arc.length(), 0.0);
    pts.pop();
    pts.extend(run(end.position, end.position + end.direction() * 6.0));
    pts.push(end.position + end.direction() * 6.0);
    pts
}

/// Aisle with four bays on each side, an entry road, an exit road and a
/// return lane.
fn parking_lot() -> PreparedMap {
    let yi = -1.75;
    let yo = 1.75;
    let p = |x: f64, y: f64| Vec2::new(x, y);
    let mut lanes = Vec::new();
    // inbound chain: entry 0, aisle segments 1..=5, exit road 6
    let xs = [-60.0, 0.0, 12.0, 24.0, 36.0, 48.0, 60.0, 120.0];
    for k in 0..7 {
        lanes.push(lane(k as u32, run(p(xs[k], yi), p(xs[k + 1], yi)), p(xs[k + 1], yi)));
    }
    // return chain 7..=11 heading -x
    let rs = [120.0, 60.0, 48.0, 36.0, 24.0, -60.0];
    for k in 0..5 {
        lanes.push(lane(7 + k as u32, run(p(rs[k], yo), p(rs[k + 1], yo)), p(rs[k + 1], yo)));
    }
    for k in 0..6 {
        link(&mut lanes, k, k + 1);
    }
    for k in 7..11 {
        link(&mut lanes, k, k + 1);
    }
    // bays 12..=15 off the aisle, 16..=19 off the return lane
    let mut id = 12;
    for k in 1..5u32 {
        let x = xs[k as usize + 1];
        let mut pts = bay(Pose::new(x, yi, 0.0), Turn::Right);
        let end = pts.pop().unwrap();
        lanes.push(lane(id, pts, end));
        link(&mut lanes, k, id);
        id += 1;
    }
    for k in 7..11u32 {
        let x = rs[(k - 7) as usize + 1];
        let mut pts = bay(Pose::new(x, yo, PI), Turn::Right);
        let end = pts.pop().unwrap();
        lanes.push(lane(id, pts, end));
        link(&mut lanes, k, id);
        id += 1;
    }
    for l in &mut lanes {
        l.left_line = LineType::Continuous;
        l.right_line = LineType::Continuous;
    }
    let net = RoadNetwork::from_lanes(lanes).expect("parking topology");
    let mut info = MapInfo::for_lanes(&net);
    info.agent_slots = slots_of(&net, &[0, 6, 7], f64::INFINITY);
    info.traffic_slots = Vec::new();
    PreparedMap {
        net: Arc::new(net),
        info,
    }
}

/// Three-lane one-way highway with logged traffic moving at a constant
/// speed per lane.
fn replay_highway() -> PreparedMap {
    let ys = [-3.5, 0.0, 3.5];
    let len = 400.0;
    let mut lanes: Vec<Lane> = ys
        .iter()
        .enumerate()
        .map(|(k, y)| lane(k as u32, run(Vec2::new(0.0, *y), Vec2::new(len, *y)), Vec2::new(len, *y)))
        .collect();
    side_by_side(&mut lanes, &[0, 1, 2]);
    let net = RoadNetwork::from_lanes(lanes).expect("highway topology");
    let speeds = [9.0, 11.0, 13.0];
    let mut tracks = Vec::new();
    let mut add = |lane: usize, x0: f64, start_tick: u32| {
        let v = speeds[lane];
        let poses: Vec<LogPose> = (0..)
            .map(|k| x0 + v * LOG_TICK * k as f64)
            .take_while(|x| *x <= len - 5.0)
            .map(|x| LogPose {
                x,
                y: ys[lane],
                heading: 0.0,
                speed: v,
            })
            .collect();
        tracks.push(Track {
            id: format!("veh{}", tracks.len()),
            start_tick,
            poses,
        });
    };
    for i in 0..3 {
        for lane in 0..3 {
            add(lane, 40.0 + 30.0 * i as f64, 0);
        }
    }
    add(0, 3.0, 150);
    add(2, 3.0, 150);
    add(0, 3.0, 300);
    add(2, 3.0, 300);
    let mut info = MapInfo::for_lanes(&net);
    let start = net.lane(LaneId(1)).unwrap();
    info.ego_starts = vec![SpawnPoint {
        lane: LaneId(1),
        s: 10.0,
        pose: start.point_at(10.0, 0.0).unwrap(),
    }];
    info.destination = Some(Destination {
        lane: LaneId(1),
        s: start.length(),
    });
    info.tracks = Some(Arc::new(TrajectoryLog { tick: LOG_TICK, tracks }));
    PreparedMap {
        net: Arc::new(net),
        info,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roadnet::route_search;

    #[test]
    fn layouts_build_with_room_for_their_agents() {
        for (l, agents) in [
            (Layout::Roundabout, 40),
            (Layout::Intersection, 30),
            (Layout::Tollgate, 40),
            (Layout::Bottleneck, 20),
            (Layout::ParkingLot, 10),
        ] {
            let m = l.build();
            assert!(m.info.agent_slots.len() >= agents, "{l:?}: {} slots", m.info.agent_slots.len());
            assert!(!m.info.exits.is_empty(), "{l:?}");
        }
    }

    #[test]
    fn parking_lot_has_eight_bays() {
        let m = Layout::ParkingLot.build();
        let bays = m.net.lanes().iter().filter(|l| l.id.0 >= 12).count();
        assert_eq!(bays, 8);
        for b in 12..20 {
            let lane = m.net.lane(LaneId(b)).unwrap();
            let r = route_search(&m.net, LaneId(0), Destination { lane: lane.id, s: lane.length() });
            assert!(r.is_ok() || b >= 16, "bay {b} unreachable from the entry");
        }
    }

    #[test]
    fn bottleneck_merges() {
        let m = Layout::Bottleneck.build();
        for start in 0..4 {
            let r = route_search(&m.net, LaneId(start), Destination { lane: LaneId(7), s: 100.0 }).unwrap();
            assert!(r.lanes.contains(&LaneId(4)) || r.lanes.contains(&LaneId(5)));
        }
    }

    #[test]
    fn replay_log_is_valid() {
        let m = Layout::ReplayHighway.build();
        let log = m.info.tracks.unwrap();
        log.validate().unwrap();
        assert_eq!(log.tracks.len(), 13);
    }
}
