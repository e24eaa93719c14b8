//! Writes the hand-authored scenario documents under `scenarios/` and their
//! digest manifest.
//!
//!     cargo run -p drivesim-core --example author_scenarios -- scenarios

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use drivesim_core::geom::Vec2;
use drivesim_core::policies::{LogPose, Track, TrajectoryLog};
use drivesim_core::roadnet::{Destination, LaneId, LaneKind, LineType};
use drivesim_core::scenario_io::{import_scenario, map_hash, EgoRoute, LaneDoc, MapDoc, Metadata, ScenarioDocument, FORMAT_VERSION};

const W: f64 = 3.5;
const TICK: f64 = 0.1;

/// Resample a dense curve at 1 m arc-length spacing.
fn resample(dense: &[Vec2]) -> Vec<Vec2> {
    let mut out = vec![dense[0]];
    let mut acc = 0.0;
    let mut next = 1.0;
    for w in dense.windows(2) {
        let d = w[0].distance(w[1]);
        while acc + d >= next {
            out.push(w[0].lerp(w[1], (next - acc) / d));
            next += 1.0;
        }
        acc += d;
    }
    let end = *dense.last().unwrap();
    if out.last().unwrap().distance(end) < 0.3 {
        out.pop();
    }
    out.push(end);
    out
}

fn curve(f: impl Fn(f64) -> Vec2, n: usize) -> Vec<Vec2> {
    resample(&(0..=n).map(|i| f(i as f64 / n as f64)).collect::<Vec<_>>())
}

fn line(a: Vec2, b: Vec2) -> Vec<Vec2> {
    curve(|t| a.lerp(b, t), 2)
}

fn bezier(p0: Vec2, p1: Vec2, p2: Vec2, p3: Vec2) -> Vec<Vec2> {
    curve(
        |t| {
            let u = 1.0 - t;
            p0 * (u * u * u) + p1 * (3.0 * u * u * t) + p2 * (3.0 * u * t * t) + p3 * (t * t * t)
        },
        400,
    )
}

fn lane(id: u32, pts: Vec<Vec2>) -> LaneDoc {
    LaneDoc {
        id,
        centerline: pts.iter().map(|p| [p.x, p.y]).collect(),
        width: W,
        left_line: LineType::Broken,
        right_line: LineType::Continuous,
        kind: LaneKind::Road,
        successors: vec![],
        predecessors: vec![],
        left_neighbor: None,
        right_neighbor: None,
    }
}

fn link(lanes: &mut [LaneDoc], from: u32, to: u32) {
    let i = lanes.iter().position(|l| l.id == from).unwrap();
    lanes[i].successors.push(to);
    let j = lanes.iter().position(|l| l.id == to).unwrap();
    lanes[j].predecessors.push(from);
}

fn neighbors(lanes: &mut [LaneDoc], right: u32, left: u32) {
    let i = lanes.iter().position(|l| l.id == right).unwrap();
    lanes[i].left_neighbor = Some(left);
    lanes[i].left_line = LineType::Broken;
    let j = lanes.iter().position(|l| l.id == left).unwrap();
    lanes[j].right_neighbor = Some(right);
    lanes[j].right_line = LineType::Broken;
}

/// Constant-speed track along a chain of lane centerlines.
fn track(id: &str, lanes: &[LaneDoc], chain: &[u32], speed: f64, start_tick: u32, skip: f64) -> Track {
    let mut pts: Vec<Vec2> = Vec::new();
    for id in chain {
        let l = lanes.iter().find(|l| l.id == *id).unwrap();
        for p in &l.centerline {
            let v = Vec2::new(p[0], p[1]);
            if pts.last().is_none_or(|q| q.distance(v) > 1e-9) {
                pts.push(v);
            }
        }
    }
    let cum: Vec<f64> = std::iter::once(0.0)
        .chain(pts.windows(2).scan(0.0, |a, w| {
            *a += w[0].distance(w[1]);
            Some(*a)
        }))
        .collect();
    let total = *cum.last().unwrap();
    let mut poses = Vec::new();
    let mut s = skip;
    let mut k = 0;
    while s <= total {
        while cum[k + 1] < s {
            k += 1;
        }
        let t = (s - cum[k]) / (cum[k + 1] - cum[k]);
        let p = pts[k].lerp(pts[k + 1], t);
        let d = pts[k + 1] - pts[k];
        poses.push(LogPose {
            x: p.x,
            y: p.y,
            heading: d.y.atan2(d.x),
            speed,
        });
        s += speed * TICK;
    }
    Track {
        id: id.into(),
        start_tick,
        poses,
    }
}

fn doc(case: &str, lanes: Vec<LaneDoc>, tracks: Vec<Track>, start: (u32, f64), dest: (u32, f64)) -> ScenarioDocument {
    ScenarioDocument {
        version: FORMAT_VERSION,
        metadata: Metadata {
            source: "hand-authored".into(),
            case_id: case.into(),
            discretized: false,
        },
        map: MapDoc::Lanes { lanes },
        tracks: (!tracks.is_empty()).then(|| TrajectoryLog { tick: TICK, tracks }),
        ego_route: Some(EgoRoute {
            start: Destination {
                lane: LaneId(start.0),
                s: start.1,
            },
            destination: Destination {
                lane: LaneId(dest.0),
                s: dest.1,
            },
        }),
    }
}

fn length(l: &LaneDoc) -> f64 {
    l.centerline
        .windows(2)
        .map(|w| Vec2::new(w[0][0], w[0][1]).distance(Vec2::new(w[1][0], w[1][1])))
        .sum()
}

/// Two-lane highway with an on-ramp feeding an acceleration lane.
fn highway_onramp() -> ScenarioDocument {
    let mut lanes = Vec::new();
    // main road split where the acceleration lane runs alongside
    for (k, (a, b)) in [(0.0, 120.0), (120.0, 220.0), (220.0, 320.0)].into_iter().enumerate() {
        let k = k as u32;
        lanes.push(lane(2 * k, line(Vec2::new(a, 0.0), Vec2::new(b, 0.0))));
        lanes.push(lane(2 * k + 1, line(Vec2::new(a, W), Vec2::new(b, W))));
    }
    for k in 0..3 {
        neighbors(&mut lanes, 2 * k, 2 * k + 1);
        if k < 2 {
            link(&mut lanes, 2 * k, 2 * k + 2);
            link(&mut lanes, 2 * k + 1, 2 * k + 3);
        }
    }
    lanes.push(lane(
        6,
        bezier(Vec2::new(20.0, -40.0), Vec2::new(60.0, -40.0), Vec2::new(80.0, -W), Vec2::new(120.0, -W)),
    ));
    lanes.push(lane(7, line(Vec2::new(120.0, -W), Vec2::new(220.0, -W))));
    link(&mut lanes, 6, 7);
    neighbors(&mut lanes, 7, 2);
    let tracks = vec![
        track("car0", &lanes, &[0, 2, 4], 22.0, 0, 40.0),
        track("car1", &lanes, &[1, 3, 5], 26.0, 0, 5.0),
        track("car2", &lanes, &[1, 3, 5], 25.0, 30, 0.0),
        track("ramp0", &lanes, &[6, 7], 14.0, 0, 30.0),
    ];
    let end = length(&lanes[4]);
    doc("highway_onramp", lanes, tracks, (0, 5.0), (4, end - 5.0))
}

/// Two lanes each way along an S-shaped urban street.
fn s_curve_street() -> ScenarioDocument {
    let axis = |t: f64| Vec2::new(300.0 * t, 25.0 * (2.0 * PI * t).sin());
    let normal = |t: f64| {
        let d = Vec2::new(300.0, 25.0 * 2.0 * PI * (2.0 * PI * t).cos());
        d.perp() * (1.0 / d.norm())
    };
    let offset = |o: f64| move |t: f64| axis(t) + normal(t) * o;
    let mut lanes = vec![
        lane(0, curve(offset(-1.5 * W), 3000)),
        lane(1, curve(offset(-0.5 * W), 3000)),
        lane(2, curve(|t| offset(1.5 * W)(1.0 - t), 3000)),
        lane(3, curve(|t| offset(0.5 * W)(1.0 - t), 3000)),
    ];
    neighbors(&mut lanes, 0, 1);
    neighbors(&mut lanes, 2, 3);
    lanes[1].left_line = LineType::Continuous;
    lanes[3].left_line = LineType::Continuous;
    let tracks = vec![
        track("lead", &lanes, &[1], 9.0, 0, 30.0),
        track("oncoming0", &lanes, &[3], 11.0, 0, 10.0),
        track("oncoming1", &lanes, &[2], 10.0, 20, 0.0),
    ];
    let end = length(&lanes[0]);
    doc("s_curve_street", lanes, tracks, (0, 5.0), (0, end - 5.0))
}

/// Single-lane arms meeting at a junction; every in-arm connects to every
/// other out-arm.
fn junction(case: &str, arms: &[f64], arm_len: f64, route: (usize, usize), tracks: &[(usize, usize, f64, u32)]) -> ScenarioDocument {
    let r0 = 12.0;
    let mut lanes = Vec::new();
    let n = arms.len() as u32;
    for (k, &th) in arms.iter().enumerate() {
        let u = Vec2::from_angle(th);
        let nrm = u.perp();
        let k = k as u32;
        // outbound keeps right of travel, inbound the other side
        lanes.push(lane(2 * k, line(u * r0 - nrm * (W / 2.0), u * arm_len - nrm * (W / 2.0))));
        lanes.push(lane(2 * k + 1, line(u * arm_len + nrm * (W / 2.0), u * r0 + nrm * (W / 2.0))));
    }
    let mut next = 2 * n;
    let mut conn = std::collections::BTreeMap::new();
    for (i, &ti) in arms.iter().enumerate() {
        for (j, &tj) in arms.iter().enumerate() {
            if i == j {
                continue;
            }
            let (ui, uj) = (Vec2::from_angle(ti), Vec2::from_angle(tj));
            let p0 = ui * r0 + ui.perp() * (W / 2.0);
            let p3 = uj * r0 - uj.perp() * (W / 2.0);
            let k = 0.55 * r0;
            let mut l = lane(next, bezier(p0, p0 - ui * k, p3 - uj * k, p3));
            l.kind = LaneKind::Junction;
            l.left_line = LineType::None;
            l.right_line = LineType::None;
            lanes.push(l);
            link(&mut lanes, 2 * i as u32 + 1, next);
            link(&mut lanes, next, 2 * j as u32);
            conn.insert((i, j), next);
            next += 1;
        }
    }
    let tr: Vec<Track> = tracks
        .iter()
        .enumerate()
        .map(|(k, &(i, j, v, t0))| {
            track(&format!("car{k}"), &lanes, &[2 * i as u32 + 1, conn[&(i, j)], 2 * j as u32], v, t0, 0.0)
        })
        .collect();
    let out = 2 * route.1 as u32;
    let end = length(&lanes[out as usize]);
    doc(case, lanes, tr, (2 * route.0 as u32 + 1, 5.0), (out, end - 5.0))
}

/// Three-lane road losing its right lane to a taper.
fn lane_drop() -> ScenarioDocument {
    let y = |k: f64| -k * W;
    let mut lanes = Vec::new();
    for k in 0..3 {
        lanes.push(lane(k, line(Vec2::new(0.0, y(k as f64)), Vec2::new(150.0, y(k as f64)))));
    }
    lanes.push(lane(3, line(Vec2::new(150.0, 0.0), Vec2::new(330.0, 0.0))));
    lanes.push(lane(4, line(Vec2::new(150.0, y(1.0)), Vec2::new(330.0, y(1.0)))));
    lanes.push(lane(
        5,
        bezier(
            Vec2::new(150.0, y(2.0)),
            Vec2::new(175.0, y(2.0)),
            Vec2::new(185.0, y(1.0)),
            Vec2::new(210.0, y(1.0)),
        ),
    ));
    neighbors(&mut lanes, 1, 0);
    neighbors(&mut lanes, 2, 1);
    neighbors(&mut lanes, 4, 3);
    link(&mut lanes, 0, 3);
    link(&mut lanes, 1, 4);
    link(&mut lanes, 2, 5);
    let tracks = vec![
        track("car0", &lanes, &[0, 3], 15.0, 0, 40.0),
        track("car1", &lanes, &[1, 4], 13.0, 0, 60.0),
        track("car2", &lanes, &[2, 5], 12.0, 0, 20.0),
    ];
    let end = length(&lanes[4]);
    doc("lane_drop", lanes, tracks, (1, 5.0), (4, end - 5.0))
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    std::fs::create_dir_all(&out).expect("create output dir");
    let docs = vec![
        highway_onramp(),
        s_curve_street(),
        junction("t_junction", &[0.0, PI, -FRAC_PI_2], 100.0, (1, 2), &[(0, 1, 8.0, 0), (2, 0, 7.0, 10)]),
        junction(
            "four_way",
            &[0.0, FRAC_PI_2, PI, -FRAC_PI_2],
            100.0,
            (2, 0),
            &[(0, 2, 8.0, 40), (1, 3, 9.0, 0), (3, 0, 6.0, 20)],
        ),
        junction("y_junction", &[0.0, 5.0 * PI / 6.0, 4.0 * PI / 3.0], 90.0, (0, 1), &[(1, 2, 8.0, 0)]),
        lane_drop(),
    ];
    let mut manifest = String::new();
    for d in docs {
        let net = import_scenario(&d).expect("authored scenario imports").net;
        let name = format!("{}.json", d.metadata.case_id);
        d.save(&out.join(&name)).expect("write scenario");
        manifest.push_str(&format!("{}  {}\n", map_hash(&net), name));
    }
    std::fs::write(out.join("digests.txt"), manifest).expect("write manifest");
}
