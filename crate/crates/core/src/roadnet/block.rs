//! Parameterized road pieces. Every block is built in a local frame whose
//! entry socket sits at the origin with traffic entering along +x; docking
//! then moves it into the world frame.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lane::{Centerline, Lane, LaneId, LaneKind, LineType, Turn};
use super::RoadError;
use crate::geom::{wrap_angle, Pose, Rigid2, Vec2};

/// Lateral angle of the S-curves used by ramps and forks.
const MERGE_ANGLE: f64 = 0.35;
/// Spawn slots are laid out every `SLOT_SPACING` metres along road lanes.
pub const SLOT_SPACING: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BlockType {
    FirstBlock,
    Straight,
    Ramp,
    Fork,
    Roundabout,
    Curve,
    TIntersection,
    Intersection,
}

impl BlockType {
    /// The types the generator draws from.
    pub const RANDOM: [BlockType; 7] = [
        BlockType::Straight,
        BlockType::Ramp,
        BlockType::Fork,
        BlockType::Roundabout,
        BlockType::Curve,
        BlockType::TIntersection,
        BlockType::Intersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockType::FirstBlock => "FirstBlock",
            BlockType::Straight => "Straight",
            BlockType::Ramp => "Ramp",
            BlockType::Fork => "Fork",
            BlockType::Roundabout => "Roundabout",
            BlockType::Curve => "Curve",
            BlockType::TIntersection => "TIntersection",
            BlockType::Intersection => "Intersection",
        }
    }

    /// Number of sockets the built block exposes, entry included.
    pub fn socket_count(self) -> usize {
        match self {
            BlockType::FirstBlock => 1,
            BlockType::Straight | BlockType::Ramp | BlockType::Fork | BlockType::Curve => 2,
            BlockType::TIntersection => 3,
            BlockType::Roundabout | BlockType::Intersection => 4,
        }
    }

    pub fn param_space(self) -> &'static [ParamSpec] {
        match self {
            BlockType::FirstBlock => FIRST_SPACE,
            BlockType::Straight => STRAIGHT_SPACE,
            BlockType::Ramp => RAMP_SPACE,
            BlockType::Fork => FORK_SPACE,
            BlockType::Roundabout => ROUNDABOUT_SPACE,
            BlockType::Curve => CURVE_SPACE,
            BlockType::TIntersection => T_SPACE,
            BlockType::Intersection => X_SPACE,
        }
    }
}

impl fmt::Display for BlockType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockType {
    type Err = RoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Ok(match norm.as_str() {
            "firstblock" | "first" => BlockType::FirstBlock,
            "straight" | "s" => BlockType::Straight,
            "ramp" | "r" => BlockType::Ramp,
            "fork" | "f" => BlockType::Fork,
            "roundabout" | "o" => BlockType::Roundabout,
            "curve" | "c" => BlockType::Curve,
            "tintersection" | "t" => BlockType::TIntersection,
            "intersection" | "x" => BlockType::Intersection,
            _ => return Err(RoadError::UnknownBlockType(s.to_string())),
        })
    }
}

/// One component of a block's parameter space. Discrete components take
/// integer values in `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub discrete: bool,
}

const fn cont(name: &'static str, lo: f64, hi: f64) -> ParamSpec {
    ParamSpec { name, lo, hi, discrete: false }
}

const fn disc(name: &'static str, lo: f64, hi: f64) -> ParamSpec {
    ParamSpec { name, lo, hi, discrete: true }
}

const FIRST_SPACE: &[ParamSpec] = &[cont("length", 60.0, 60.0)];
const STRAIGHT_SPACE: &[ParamSpec] = &[cont("length", 40.0, 80.0)];
const CURVE_SPACE: &[ParamSpec] = &[
    cont("radius", 40.0, 100.0),
    cont("angle", 0.5, 2.0),
    disc("turn_right", 0.0, 1.0),
];
const RAMP_SPACE: &[ParamSpec] = &[
    cont("merge_radius", 40.0, 70.0),
    cont("accel_length", 30.0, 50.0),
    cont("tail_length", 10.0, 30.0),
];
const FORK_SPACE: &[ParamSpec] = &[
    cont("lead_length", 10.0, 30.0),
    cont("split_radius", 40.0, 70.0),
    cont("exit_length", 10.0, 30.0),
    cont("main_length", 40.0, 70.0),
];
const ROUNDABOUT_SPACE: &[ParamSpec] = &[
    cont("ring_radius", 20.0, 35.0),
    cont("connector_radius", 15.0, 25.0),
    cont("arm_length", 15.0, 35.0),
];
const T_SPACE: &[ParamSpec] = &[
    cont("turn_radius", 8.0, 16.0),
    cont("arm_length", 15.0, 40.0),
    disc("missing_arm", 0.0, 2.0),
];
const X_SPACE: &[ParamSpec] = &[cont("turn_radius", 8.0, 16.0), cont("arm_length", 15.0, 40.0)];

/// Map-wide cross-section shared by all blocks so sockets always match.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub lanes_per_direction: usize,
    pub lane_width: f64,
}

impl Default for RoadSpec {
    fn default() -> Self {
        Self {
            lanes_per_direction: 3,
            lane_width: 3.5,
        }
    }
}

impl RoadSpec {
    /// Lateral distance of lane `j`'s centerline from the road center.
    pub fn offset(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.lane_width
    }

    pub fn half_width(&self) -> f64 {
        self.lanes_per_direction as f64 * self.lane_width
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocketDirection {
    Inbound,
    Outbound,
}

/// Docking anchor. The anchor heading points along the traffic that enters
/// the block (inbound) or leaves it (outbound).
#[derive(Clone, Debug, PartialEq)]
pub struct Socket {
    pub anchor: Pose,
    pub direction: SocketDirection,
    /// Lanes starting at the anchor, innermost first.
    pub incoming: Vec<LaneId>,
    /// Lanes ending at the anchor, innermost first.
    pub outgoing: Vec<LaneId>,
    /// Half of the full road cross-section at the anchor.
    pub half_width: f64,
}

impl Socket {
    /// All lanes crossing the anchor.
    pub fn lanes(&self) -> impl Iterator<Item = LaneId> + '_ {
        self.incoming.iter().chain(self.outgoing.iter()).copied()
    }

    /// Heading of the socket as an undirected-graph attachment point: it
    /// always faces away from the block.
    pub fn facing_heading(&self) -> f64 {
        match self.direction {
            SocketDirection::Inbound => wrap_angle(self.anchor.heading + PI),
            SocketDirection::Outbound => self.anchor.heading,
        }
    }

    /// End points of the cross-section the socket spans.
    pub fn cross_section(&self) -> (Vec2, Vec2) {
        let n = self.anchor.left() * self.half_width;
        (self.anchor.position - n, self.anchor.position + n)
    }

    fn transformed(&self, t: &Rigid2) -> Socket {
        Socket {
            anchor: t.apply_pose(self.anchor),
            ..self.clone()
        }
    }

    pub(crate) fn remap_ids(&mut self, f: impl Fn(LaneId) -> LaneId) {
        for id in self.incoming.iter_mut().chain(self.outgoing.iter_mut()) {
            *id = f(*id);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpawnPoint {
    pub lane: LaneId,
    pub s: f64,
    pub pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub block_type: BlockType,
    pub params: Vec<f64>,
    pub road: RoadSpec,
    pub nodes: Vec<Vec2>,
    pub lanes: Vec<Lane>,
    pub sockets: Vec<Socket>,
    pub spawn_points: Vec<SpawnPoint>,
}

impl Block {
    /// Build a block in its local frame. Lane ids are block-local, starting
    /// at zero.
    pub fn build(block_type: BlockType, params: &[f64], road: &RoadSpec) -> Result<Block, RoadError> {
        let space = block_type.param_space();
        if params.len() != space.len() {
            return Err(RoadError::Params(format!(
                "{block_type} takes {} parameters, got {}",
                space.len(),
                params.len()
            )));
        }
        for (v, spec) in params.iter().zip(space) {
            if !(*v >= spec.lo && *v <= spec.hi) || (spec.discrete && v.fract() != 0.0) {
                return Err(RoadError::Params(format!(
                    "{block_type}.{} = {v} outside [{}, {}]",
                    spec.name, spec.lo, spec.hi
                )));
            }
        }
        if road.lanes_per_direction == 0 || !(road.lane_width > 0.0) {
            return Err(RoadError::Params("road needs at least one lane of positive width".into()));
        }
        let mut b = Builder::new(*road);
        match block_type {
            BlockType::FirstBlock => b.first(params[0]),
            BlockType::Straight => b.straight(params[0]),
            BlockType::Curve => b.curve(params[0], params[1], if params[2] == 1.0 { Turn::Right } else { Turn::Left }),
            BlockType::Ramp => b.ramp(params[0], params[1], params[2]),
            BlockType::Fork => b.fork(params[0], params[1], params[2], params[3]),
            BlockType::Roundabout => b.roundabout(params[0], params[1], params[2]),
            BlockType::TIntersection => b.intersection(params[0], params[1], Some(params[2] as usize)),
            BlockType::Intersection => b.intersection(params[0], params[1], None),
        }
        Ok(b.finish(block_type, params.to_vec()))
    }

    pub fn entry_index(&self) -> Option<usize> {
        self.sockets.iter().position(|s| s.direction == SocketDirection::Inbound)
    }

    pub fn entry_socket(&self) -> Option<&Socket> {
        self.entry_index().map(|i| &self.sockets[i])
    }

    pub fn outbound_sockets(&self) -> impl Iterator<Item = &Socket> {
        self.sockets.iter().filter(|s| s.direction == SocketDirection::Outbound)
    }

    pub fn transformed(&self, t: &Rigid2) -> Block {
        Block {
            block_type: self.block_type,
            params: self.params.clone(),
            road: self.road,
            nodes: self.nodes.iter().map(|p| t.apply(*p)).collect(),
            lanes: self.lanes.iter().map(|l| l.transformed(t)).collect(),
            sockets: self.sockets.iter().map(|s| s.transformed(t)).collect(),
            spawn_points: self
                .spawn_points
                .iter()
                .map(|sp| SpawnPoint {
                    pose: t.apply_pose(sp.pose),
                    ..*sp
                })
                .collect(),
        }
    }

    pub(crate) fn remap_ids(&mut self, f: impl Fn(LaneId) -> LaneId + Copy) {
        for lane in &mut self.lanes {
            lane.remap_ids(f);
        }
        for s in &mut self.sockets {
            s.remap_ids(f);
        }
        for sp in &mut self.spawn_points {
            sp.lane = f(sp.lane);
        }
    }
}

/// Spawn slots of a lane: centered in consecutive `SLOT_SPACING` windows.
pub fn lane_slots(lane: &Lane) -> Vec<f64> {
    if lane.kind != LaneKind::Road {
        return Vec::new();
    }
    let n = (lane.length() / SLOT_SPACING).floor() as usize;
    (0..n).map(|i| SLOT_SPACING * (i as f64 + 0.5)).collect()
}

/// Lanes of a two-way road section, indexed `[piece][lane]`.
struct Section {
    forward: Vec<Vec<LaneId>>,
    /// Pieces in backward travel order.
    backward: Vec<Vec<LaneId>>,
    start: Pose,
    end: Pose,
}

impl Section {
    fn first_forward(&self) -> &[LaneId] {
        &self.forward[0]
    }
    fn last_forward(&self) -> &[LaneId] {
        self.forward.last().unwrap()
    }
    fn first_backward(&self) -> &[LaneId] {
        &self.backward[0]
    }
    fn last_backward(&self) -> &[LaneId] {
        self.backward.last().unwrap()
    }
}

struct Builder {
    road: RoadSpec,
    lanes: Vec<Lane>,
    sockets: Vec<Socket>,
    nodes: Vec<Vec2>,
}

impl Builder {
    fn new(road: RoadSpec) -> Self {
        Self {
            road,
            lanes: Vec::new(),
            sockets: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, centerline: Centerline, kind: LaneKind) -> LaneId {
        let id = LaneId(self.lanes.len() as u32);
        let mut lane = Lane::new(id, centerline, self.road.lane_width);
        lane.kind = kind;
        if kind == LaneKind::Junction {
            lane.left_line = LineType::None;
            lane.right_line = LineType::None;
        }
        self.lanes.push(lane);
        id
    }

    fn lane_mut(&mut self, id: LaneId) -> &mut Lane {
        &mut self.lanes[id.0 as usize]
    }

    fn link(&mut self, from: LaneId, to: LaneId) {
        self.lane_mut(from).successors.push(to);
        self.lane_mut(to).predecessors.push(from);
    }

    fn neighbors(&mut self, left: LaneId, right: LaneId) {
        self.lane_mut(left).right_neighbor = Some(right);
        self.lane_mut(right).left_neighbor = Some(left);
    }

    fn one_way_group(&mut self, pieces: &[Centerline], kind: LaneKind) -> Vec<Vec<LaneId>> {
        let k = self.road.lanes_per_direction;
        let mut out: Vec<Vec<LaneId>> = Vec::with_capacity(pieces.len());
        for piece in pieces {
            let ids: Vec<LaneId> = (0..k)
                .map(|j| self.push(piece.offset(-self.road.offset(j)), kind))
                .collect();
            for j in 0..k {
                let lane = self.lane_mut(ids[j]);
                if kind == LaneKind::Road {
                    lane.left_line = if j == 0 { LineType::Continuous } else { LineType::Broken };
                    lane.right_line = if j + 1 == k { LineType::Continuous } else { LineType::Broken };
                }
                if j > 0 {
                    self.neighbors(ids[j - 1], ids[j]);
                }
            }
            if let Some(prev) = out.last() {
                for j in 0..k {
                    self.link(prev[j], ids[j]);
                }
            }
            out.push(ids);
        }
        out
    }

    /// Two-way road along the reference `pieces`.
    fn section(&mut self, pieces: &[Centerline]) -> Section {
        let forward = self.one_way_group(pieces, LaneKind::Road);
        let reversed: Vec<Centerline> = pieces.iter().rev().map(|p| p.reversed()).collect();
        let backward = self.one_way_group(&reversed, LaneKind::Road);
        let start = pieces[0].point_at(0.0, 0.0);
        let last = pieces.last().unwrap();
        let end = last.point_at(last.length(), 0.0);
        self.nodes.push(start.position);
        for p in pieces {
            let e = p.point_at(p.length(), 0.0);
            self.nodes.push(e.position);
        }
        Section {
            forward,
            backward,
            start,
            end,
        }
    }

    fn socket(&mut self, anchor: Pose, direction: SocketDirection, incoming: &[LaneId], outgoing: &[LaneId]) {
        self.sockets.push(Socket {
            anchor,
            direction,
            incoming: incoming.to_vec(),
            outgoing: outgoing.to_vec(),
            half_width: self.road.half_width(),
        });
    }

    fn entry_socket(&mut self, sec: &Section) {
        let (inc, out) = (sec.first_forward().to_vec(), sec.last_backward().to_vec());
        self.socket(sec.start, SocketDirection::Inbound, &inc, &out);
    }

    fn exit_socket(&mut self, sec: &Section) {
        let (inc, out) = (sec.first_backward().to_vec(), sec.last_forward().to_vec());
        self.socket(sec.end, SocketDirection::Outbound, &inc, &out);
    }

    fn first(&mut self, length: f64) {
        let sec = self.section(&[Centerline::straight(Pose::default(), length)]);
        self.exit_socket(&sec);
    }

    fn straight(&mut self, length: f64) {
        let sec = self.section(&[Centerline::straight(Pose::default(), length)]);
        self.entry_socket(&sec);
        self.exit_socket(&sec);
    }

    fn curve(&mut self, radius: f64, angle: f64, turn: Turn) {
        let sec = self.section(&[Centerline::arc(Pose::default(), radius, turn, angle)]);
        self.entry_socket(&sec);
        self.exit_socket(&sec);
    }

    /// On-ramp: a one-way ramp lane S-curves in from the right and becomes
    /// an acceleration lane beside the rightmost lane.
    fn ramp(&mut self, merge_radius: f64, accel_length: f64, tail_length: f64) {
        let k = self.road.lanes_per_direction;
        let merge_length = 2.0 * merge_radius * MERGE_ANGLE.sin();
        let shift = 2.0 * merge_radius * (1.0 - MERGE_ANGLE.cos());
        let pieces = [
            Centerline::straight(Pose::default(), merge_length),
            Centerline::straight(Pose::new(merge_length, 0.0, 0.0), accel_length),
            Centerline::straight(Pose::new(merge_length + accel_length, 0.0, 0.0), tail_length),
        ];
        let sec = self.section(&pieces);
        let accel_offset = self.road.offset(k);
        let s1 = Centerline::arc(Pose::new(0.0, -accel_offset - shift, 0.0), merge_radius, Turn::Left, MERGE_ANGLE);
        let s1_end = s1.point_at(s1.length(), 0.0);
        let s2 = Centerline::arc(s1_end, merge_radius, Turn::Right, MERGE_ANGLE);
        let accel = Centerline::straight(Pose::new(merge_length, -accel_offset, 0.0), accel_length);
        let a = self.push(s1, LaneKind::Road);
        let b = self.push(s2, LaneKind::Road);
        let c = self.push(accel, LaneKind::Road);
        for id in [a, b, c] {
            let lane = self.lane_mut(id);
            lane.left_line = LineType::Continuous;
            lane.right_line = LineType::Continuous;
        }
        self.lane_mut(c).left_line = LineType::Broken;
        self.link(a, b);
        self.link(b, c);
        let main = sec.forward[1][k - 1];
        self.lane_mut(main).right_line = LineType::Broken;
        self.neighbors(main, c);
        self.nodes.push(Vec2::new(0.0, -accel_offset - shift));
        self.entry_socket(&sec);
        self.exit_socket(&sec);
    }

    /// Lane split: the rightmost lane forks into the main road and an exit
    /// branch that S-curves away to the right and ends.
    fn fork(&mut self, lead_length: f64, split_radius: f64, exit_length: f64, main_length: f64) {
        let k = self.road.lanes_per_direction;
        let pieces = [
            Centerline::straight(Pose::default(), lead_length),
            Centerline::straight(Pose::new(lead_length, 0.0, 0.0), main_length),
        ];
        let sec = self.section(&pieces);
        let start = Pose::new(lead_length, -self.road.offset(k - 1), 0.0);
        let s1 = Centerline::arc(start, split_radius, Turn::Right, MERGE_ANGLE);
        let s2 = Centerline::arc(s1.point_at(s1.length(), 0.0), split_radius, Turn::Left, MERGE_ANGLE);
        let tail = Centerline::straight(s2.point_at(s2.length(), 0.0), exit_length);
        let tail_end = tail.point_at(tail.length(), 0.0).position;
        let ids = [s1, s2, tail].map(|c| self.push(c, LaneKind::Road));
        for id in ids {
            let lane = self.lane_mut(id);
            lane.left_line = LineType::Continuous;
            lane.right_line = LineType::Continuous;
        }
        self.link(sec.forward[0][k - 1], ids[0]);
        self.link(ids[0], ids[1]);
        self.link(ids[1], ids[2]);
        self.nodes.push(tail_end);
        self.entry_socket(&sec);
        self.exit_socket(&sec);
    }

    /// Arm sections of a junction centered at `center`. Returns per-arm
    /// (inward lanes, outward lanes) and registers the sockets.
    fn arms(&mut self, center: Vec2, arm_angles: &[f64], inner: f64, arm_length: f64) -> Vec<(Vec<LaneId>, Vec<LaneId>)> {
        let mut out = Vec::new();
        for (i, &phi) in arm_angles.iter().enumerate() {
            let u = Vec2::from_angle(phi);
            if i == 0 {
                // entry arm runs toward the junction
                let p = center + u * (inner + arm_length);
                let sec = self.section(&[Centerline::straight(
                    Pose {
                        position: p,
                        heading: wrap_angle(phi + PI),
                    },
                    arm_length,
                )]);
                self.entry_socket(&sec);
                out.push((sec.forward[0].clone(), sec.backward[0].clone()));
            } else {
                let p = center + u * inner;
                let sec = self.section(&[Centerline::straight(
                    Pose {
                        position: p,
                        heading: wrap_angle(phi),
                    },
                    arm_length,
                )]);
                self.exit_socket(&sec);
                out.push((sec.backward[0].clone(), sec.forward[0].clone()));
            }
        }
        out
    }

    /// Right normal of a heading.
    fn right_of(heading: f64) -> Vec2 {
        Vec2::new(heading.sin(), -heading.cos())
    }

    fn roundabout(&mut self, ring_radius: f64, connector_radius: f64, arm_length: f64) {
        let k = self.road.lanes_per_direction;
        let reach = ((ring_radius + connector_radius).powi(2) - connector_radius.powi(2)).sqrt();
        let beta = (connector_radius / (ring_radius + connector_radius)).asin();
        let center = Vec2::new(arm_length + reach, 0.0);
        let angles = [PI, 1.5 * PI, 0.0, FRAC_PI_2];
        let arms = self.arms(center, &angles, reach, arm_length);
        self.nodes.push(center);

        // counter-clockwise order of arms as seen from the ring
        let ccw = [PI, 1.5 * PI, 2.0 * PI, 2.5 * PI];
        // ring[i] = (passing segment at arm i, segment from arm i to arm i+1), per lane
        let mut passing: Vec<Vec<LaneId>> = Vec::new();
        let mut between: Vec<Vec<LaneId>> = Vec::new();
        for i in 0..4 {
            let mut pa = Vec::new();
            let mut bt = Vec::new();
            for j in 0..k {
                let rho = ring_radius + self.road.offset(j);
                let at = |psi: f64| Pose {
                    position: center + Vec2::from_angle(psi) * rho,
                    heading: wrap_angle(psi + FRAC_PI_2),
                };
                pa.push(self.push(Centerline::arc(at(ccw[i] - beta), rho, Turn::Left, 2.0 * beta), LaneKind::Junction));
                bt.push(self.push(
                    Centerline::arc(at(ccw[i] + beta), rho, Turn::Left, FRAC_PI_2 - 2.0 * beta),
                    LaneKind::Junction,
                ));
            }
            passing.push(pa);
            between.push(bt);
        }
        for i in 0..4 {
            for j in 0..k {
                self.link(passing[i][j], between[i][j]);
                self.link(between[i][j], passing[(i + 1) % 4][j]);
                if j > 0 {
                    self.neighbors(passing[i][j - 1], passing[i][j]);
                    self.neighbors(between[i][j - 1], between[i][j]);
                }
            }
        }
        for (i, &phi) in ccw.iter().enumerate() {
            let junction = center + Vec2::from_angle(phi) * reach;
            let (inward, outward) = &arms[i];
            for j in 0..k {
                let a = self.road.offset(j);
                let r = connector_radius - a;
                let heading_in = wrap_angle(phi + PI);
                let entry_start = Pose {
                    position: junction + Self::right_of(heading_in) * a,
                    heading: heading_in,
                };
                let entry = self.push(Centerline::arc(entry_start, r, Turn::Right, FRAC_PI_2 - beta), LaneKind::Junction);
                self.link(inward[j], entry);
                self.link(entry, between[i][j]);

                let rho = ring_radius + a;
                let psi = phi - beta;
                let exit_start = Pose {
                    position: center + Vec2::from_angle(psi) * rho,
                    heading: wrap_angle(psi + FRAC_PI_2),
                };
                let exit = self.push(Centerline::arc(exit_start, r, Turn::Right, FRAC_PI_2 - beta), LaneKind::Junction);
                let prev = (i + 3) % 4;
                self.link(between[prev][j], exit);
                self.link(exit, outward[j]);
            }
        }
    }

    /// Four-way (or, with `missing`, three-way) intersection. `missing`
    /// names the absent arm relative to the entry: 0 right, 1 straight, 2 left.
    fn intersection(&mut self, turn_radius: f64, arm_length: f64, missing: Option<usize>) {
        let k = self.road.lanes_per_direction;
        let d = self.road.half_width() + turn_radius;
        let center = Vec2::new(arm_length + d, 0.0);
        // entry (west), right (south), straight (east), left (north)
        let all = [PI, 1.5 * PI, 0.0, FRAC_PI_2];
        let present: Vec<usize> = (0..4).filter(|&i| missing.map_or(true, |m| i != m + 1)).collect();
        let angles: Vec<f64> = present.iter().map(|&i| all[i]).collect();
        let arms = self.arms(center, &angles, d, arm_length);
        self.nodes.push(center);
        for (ai, &from) in present.iter().enumerate() {
            let phi = all[from];
            let heading_in = wrap_angle(phi + PI);
            let junction = center + Vec2::from_angle(phi) * d;
            for (bi, &to) in present.iter().enumerate() {
                if ai == bi {
                    continue;
                }
                // relative position of the target arm seen from the approach
                let rel = (to + 4 - from) % 4;
                for j in 0..k {
                    let a = self.road.offset(j);
                    let start = Pose {
                        position: junction + Self::right_of(heading_in) * a,
                        heading: heading_in,
                    };
                    let c = match rel {
                        1 => Centerline::arc(start, d - a, Turn::Right, FRAC_PI_2),
                        2 => Centerline::straight(start, 2.0 * d),
                        3 => Centerline::arc(start, d + a, Turn::Left, FRAC_PI_2),
                        _ => unreachable!(),
                    };
                    let id = self.push(c, LaneKind::Junction);
                    self.link(arms[ai].0[j], id);
                    self.link(id, arms[bi].1[j]);
                }
            }
        }
    }

    fn finish(self, block_type: BlockType, params: Vec<f64>) -> Block {
        let spawn_points = self
            .lanes
            .iter()
            .flat_map(|lane| {
                lane_slots(lane).into_iter().map(move |s| SpawnPoint {
                    lane: lane.id,
                    s,
                    pose: lane.centerline.point_at(s, 0.0),
                })
            })
            .collect();
        Block {
            block_type,
            params,
            road: self.road,
            nodes: self.nodes,
            lanes: self.lanes,
            sockets: self.sockets,
            spawn_points,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mid_params(t: BlockType) -> Vec<f64> {
        t.param_space()
            .iter()
            .map(|p| if p.discrete { p.lo } else { (p.lo + p.hi) / 2.0 })
            .collect()
    }

    fn all_variants() -> Vec<Block> {
        let road = RoadSpec::default();
        let mut out = Vec::new();
        for t in BlockType::RANDOM.iter().copied().chain([BlockType::FirstBlock]) {
            let space = t.param_space();
            let mut p = mid_params(t);
            out.push(Block::build(t, &p, &road).unwrap());
            for (i, spec) in space.iter().enumerate() {
                if spec.discrete {
                    for v in (spec.lo as i64)..=(spec.hi as i64) {
                        p[i] = v as f64;
                        out.push(Block::build(t, &p, &road).unwrap());
                    }
                    p[i] = spec.lo;
                }
            }
            for (i, spec) in space.iter().enumerate() {
                if !spec.discrete {
                    let mut lo = mid_params(t);
                    lo[i] = spec.lo;
                    out.push(Block::build(t, &lo, &road).unwrap());
                    let mut hi = mid_params(t);
                    hi[i] = spec.hi;
                    out.push(Block::build(t, &hi, &road).unwrap());
                }
            }
        }
        out
    }

    #[test]
    fn socket_counts_follow_block_type() {
        for b in all_variants() {
            assert_eq!(b.sockets.len(), b.block_type.socket_count(), "{}", b.block_type);
            let entries = b.sockets.iter().filter(|s| s.direction == SocketDirection::Inbound).count();
            assert_eq!(entries, usize::from(b.block_type != BlockType::FirstBlock));
        }
    }

    #[test]
    fn successors_are_geometrically_continuous() {
        for b in all_variants() {
            for lane in &b.lanes {
                let end = lane.centerline.point_at(lane.length(), 0.0);
                for succ in &lane.successors {
                    let next = &b.lanes[succ.0 as usize];
                    let start = next.centerline.point_at(0.0, 0.0);
                    assert!(
                        end.position.distance(start.position) < 1e-6,
                        "{}: {} -> {} gap {}",
                        b.block_type,
                        lane.id,
                        succ,
                        end.position.distance(start.position)
                    );
                    assert!(wrap_angle(end.heading - start.heading).abs() < 1e-6, "{} heading jump", b.block_type);
                }
            }
        }
    }

    #[test]
    fn neighbors_are_symmetric() {
        for b in all_variants() {
            for lane in &b.lanes {
                if let Some(l) = lane.left_neighbor {
                    assert_eq!(b.lanes[l.0 as usize].right_neighbor, Some(lane.id));
                }
                if let Some(r) = lane.right_neighbor {
                    assert_eq!(b.lanes[r.0 as usize].left_neighbor, Some(lane.id));
                }
            }
        }
    }

    #[test]
    fn socket_lanes_meet_the_anchor() {
        for b in all_variants() {
            for s in &b.sockets {
                for id in &s.incoming {
                    let p = b.lanes[id.0 as usize].centerline.point_at(0.0, 0.0);
                    assert!(s.anchor.to_local(p.position).x.abs() < 1e-6);
                }
                for id in &s.outgoing {
                    let lane = &b.lanes[id.0 as usize];
                    let p = lane.centerline.point_at(lane.length(), 0.0);
                    assert!(s.anchor.to_local(p.position).x.abs() < 1e-6);
                }
                assert_eq!(s.incoming.len(), b.road.lanes_per_direction);
                assert_eq!(s.outgoing.len(), b.road.lanes_per_direction);
            }
        }
    }

    #[test]
    fn entry_socket_sits_at_origin() {
        for b in all_variants() {
            if let Some(e) = b.entry_socket() {
                assert!(e.anchor.position.norm() < 1e-9);
                assert!(e.anchor.heading.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn out_of_space_params_are_rejected() {
        let road = RoadSpec::default();
        assert!(Block::build(BlockType::Straight, &[10.0], &road).is_err());
        assert!(Block::build(BlockType::Curve, &[50.0, 1.0, 0.5], &road).is_err());
        assert!(Block::build(BlockType::Straight, &[], &road).is_err());
    }

    #[test]
    fn block_type_names_parse() {
        for t in BlockType::RANDOM {
            assert_eq!(t.name().parse::<BlockType>().unwrap(), t);
        }
        assert_eq!("T-Intersection".parse::<BlockType>().unwrap(), BlockType::TIntersection);
        assert!("Spiral".parse::<BlockType>().is_err());
    }
}
