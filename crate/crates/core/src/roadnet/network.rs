use serde::{Deserialize, Serialize};

use super::block::{Block, BlockType, RoadSpec, Socket, SocketDirection, SpawnPoint};
use super::lane::{Lane, LaneId};
use super::RoadError;
use crate::geom::{wrap_angle, Aabb, Rigid2, Segment, Vec2};

/// Chord length used to discretize lane boundaries for crossover tests.
pub const BOUNDARY_CHORD: f64 = 2.0;
/// Boundaries closer than this count as crossing.
pub const CROSSOVER_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frenet {
    pub lane: LaneId,
    pub s: f64,
    pub l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Destination {
    pub lane: LaneId,
    pub s: f64,
}

/// A block as it lives inside a network, with what `pop` needs to undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRecord {
    pub block_type: BlockType,
    pub params: Vec<f64>,
    pub first_lane: u32,
    pub lane_count: u32,
    /// The socket this block docked onto, in world frame.
    pub joint: Option<Socket>,
    pub sockets: Vec<Socket>,
    pub spawn_points: Vec<SpawnPoint>,
    pub nodes: Vec<Vec2>,
    consumed: Option<(usize, Socket)>,
    pushed_sockets: usize,
}

impl BlockRecord {
    pub fn lane_ids(&self) -> impl Iterator<Item = LaneId> {
        (self.first_lane..self.first_lane + self.lane_count).map(LaneId)
    }
}

#[derive(Clone, Debug)]
struct BoundaryCache {
    bounds: Aabb,
    segments: Vec<Segment>,
}

fn boundary_cache(lane: &Lane) -> BoundaryCache {
    let [left, right] = lane.boundaries(BOUNDARY_CHORD);
    let mut segments = Vec::with_capacity(left.len() + right.len());
    for side in [&left, &right] {
        for w in side.windows(2) {
            segments.push(Segment::new(w[0], w[1]));
        }
    }
    let bounds = Aabb::from_points(left.iter().chain(right.iter()).copied());
    BoundaryCache { bounds, segments }
}

/// Lane graph assembled from blocks (procedural maps) or imported directly.
#[derive(Clone, Debug)]
pub struct RoadNetwork {
    road: Option<RoadSpec>,
    blocks: Vec<BlockRecord>,
    /// Sorted by id.
    lanes: Vec<Lane>,
    boundaries: Vec<BoundaryCache>,
    open_sockets: Vec<Socket>,
    destination: Option<Destination>,
    next_id: u32,
}

impl RoadNetwork {
    /// A network seeded with one root block placed as built (FirstBlock for
    /// procedural maps). All of its sockets are open.
    pub fn with_root(block: Block) -> Self {
        let mut net = Self {
            road: Some(block.road),
            blocks: Vec::new(),
            lanes: Vec::new(),
            boundaries: Vec::new(),
            open_sockets: Vec::new(),
            destination: None,
            next_id: 0,
        };
        net.insert_block(block, None, None);
        net
    }

    /// A network with a FirstBlock of the standard length.
    pub fn first_block(road: RoadSpec) -> Self {
        let first = Block::build(BlockType::FirstBlock, &[60.0], &road).expect("FirstBlock parameters are fixed");
        Self::with_root(first)
    }

    /// Network from a free-form lane set (imported maps). Ids must be unique
    /// and every reference must resolve.
    pub fn from_lanes(mut lanes: Vec<Lane>) -> Result<Self, RoadError> {
        lanes.sort_by_key(|l| l.id);
        for w in lanes.windows(2) {
            if w[0].id == w[1].id {
                return Err(RoadError::Topology(format!("duplicate lane id {}", w[0].id)));
            }
        }
        let exists = |id: LaneId| lanes.binary_search_by_key(&id, |l| l.id).is_ok();
        for lane in &lanes {
            for r in lane
                .successors
                .iter()
                .chain(lane.predecessors.iter())
                .chain(lane.left_neighbor.iter())
                .chain(lane.right_neighbor.iter())
            {
                if !exists(*r) {
                    return Err(RoadError::Topology(format!("{} references missing {}", lane.id, r)));
                }
            }
        }
        let boundaries = lanes.iter().map(boundary_cache).collect();
        let next_id = lanes.last().map_or(0, |l| l.id.0 + 1);
        Ok(Self {
            road: None,
            blocks: Vec::new(),
            lanes,
            boundaries,
            open_sockets: Vec::new(),
            destination: None,
            next_id,
        })
    }

    pub fn road(&self) -> Option<&RoadSpec> {
        self.road.as_ref()
    }

    pub fn blocks(&self) -> &[BlockRecord] {
        &self.blocks
    }

    /// Number of blocks beyond the root block.
    pub fn appended_blocks(&self) -> usize {
        self.blocks.len().saturating_sub(1)
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn open_sockets(&self) -> &[Socket] {
        &self.open_sockets
    }

    pub fn destination(&self) -> Option<Destination> {
        self.destination
    }

    pub fn set_destination(&mut self, dest: Destination) -> Result<(), RoadError> {
        let lane = self.lane(dest.lane)?;
        if !(0.0..=lane.length()).contains(&dest.s) {
            return Err(RoadError::OutOfRange {
                lane: dest.lane,
                s: dest.s,
                length: lane.length(),
            });
        }
        self.destination = Some(dest);
        Ok(())
    }

    /// Destination at the end of the innermost lane leaving through the
    /// first outbound socket of the most recently added block.
    pub fn default_destination(&self) -> Option<Destination> {
        let last = self.blocks.last()?;
        let socket = last.sockets.iter().find(|s| s.direction == SocketDirection::Outbound)?;
        let lane = self.lane(*socket.outgoing.first()?).ok()?;
        Some(Destination {
            lane: lane.id,
            s: lane.length(),
        })
    }

    fn index_of(&self, id: LaneId) -> Option<usize> {
        let i = id.0 as usize;
        if self.lanes.get(i).is_some_and(|l| l.id == id) {
            return Some(i);
        }
        self.lanes.binary_search_by_key(&id, |l| l.id).ok()
    }

    pub fn lane(&self, id: LaneId) -> Result<&Lane, RoadError> {
        self.index_of(id).map(|i| &self.lanes[i]).ok_or(RoadError::UnknownLane(id))
    }

    fn lane_mut(&mut self, id: LaneId) -> Result<&mut Lane, RoadError> {
        let i = self.index_of(id).ok_or(RoadError::UnknownLane(id))?;
        Ok(&mut self.lanes[i])
    }

    /// Total length of all lanes.
    pub fn total_lane_length(&self) -> f64 {
        self.lanes.iter().map(|l| l.length()).sum()
    }

    pub fn bounds(&self) -> Aabb {
        self.lanes.iter().fold(Aabb::EMPTY, |b, l| b.union(l.bounds()))
    }

    /// Block owning a lane, for procedural maps.
    pub fn block_of(&self, id: LaneId) -> Option<usize> {
        self.blocks
            .iter()
            .position(|b| id.0 >= b.first_lane && id.0 < b.first_lane + b.lane_count)
    }

    pub fn spawn_points(&self) -> impl Iterator<Item = &SpawnPoint> {
        self.blocks.iter().flat_map(|b| b.spawn_points.iter())
    }

    /// Frenet coordinates of `point` on `lane` without range checks.
    pub fn project_on(&self, lane: LaneId, point: Vec2) -> Result<Frenet, RoadError> {
        let (s, l) = self.lane(lane)?.project(point);
        Ok(Frenet { lane, s, l })
    }

    /// Closest lane to `point` by lateral offset among lanes whose
    /// longitudinal range covers it. Ties go to the lowest lane id; a
    /// `hint` lane wins ties against every other lane.
    pub fn world_to_frenet(&self, point: Vec2, hint: Option<LaneId>) -> Result<Frenet, RoadError> {
        const SLACK: f64 = 1e-6;
        let mut best: Option<Frenet> = None;
        let consider = |lane: &Lane, best: &mut Option<Frenet>| {
            let (s, l) = lane.project(point);
            if s < -SLACK || s > lane.length() + SLACK || l.abs() > 2.0 * lane.width {
                return;
            }
            let better = match best {
                None => true,
                Some(b) => l.abs() < b.l.abs(),
            };
            if better {
                *best = Some(Frenet {
                    lane: lane.id,
                    s: s.clamp(0.0, lane.length()),
                    l,
                });
            }
        };
        if let Some(h) = hint.and_then(|h| self.index_of(h)) {
            consider(&self.lanes[h], &mut best);
        }
        for lane in &self.lanes {
            if Some(lane.id) == hint || !lane.bounds().inflate(lane.width).contains(point) {
                continue;
            }
            consider(lane, &mut best);
        }
        best.ok_or(RoadError::OffNetwork { x: point.x, y: point.y })
    }

    fn insert_block(&mut self, mut block: Block, joint: Option<Socket>, consumed: Option<(usize, Socket)>) -> usize {
        let first = self.next_id;
        block.remap_ids(|id| LaneId(id.0 + first));
        let lane_count = block.lanes.len() as u32;
        let entry = block.entry_index().filter(|_| joint.is_some());
        let mut pushed = 0;
        for (i, s) in block.sockets.iter().enumerate() {
            if Some(i) != entry {
                self.open_sockets.push(s.clone());
                pushed += 1;
            }
        }
        for lane in block.lanes {
            self.boundaries.push(boundary_cache(&lane));
            self.lanes.push(lane);
        }
        self.next_id += lane_count;
        self.blocks.push(BlockRecord {
            block_type: block.block_type,
            params: block.params,
            first_lane: first,
            lane_count,
            joint,
            sockets: block.sockets,
            spawn_points: block.spawn_points,
            nodes: block.nodes,
            consumed,
            pushed_sockets: pushed,
        });
        self.blocks.len() - 1
    }

    /// Merge a docked, crossover-free block onto the open socket it was
    /// docked to. The consumed socket leaves the open list.
    pub fn append(&mut self, block: Block, target_index: usize) -> Result<(), RoadError> {
        let target = self
            .open_sockets
            .get(target_index)
            .cloned()
            .ok_or_else(|| RoadError::Docking(format!("no open socket {target_index}")))?;
        let entry = block
            .entry_socket()
            .cloned()
            .ok_or_else(|| RoadError::Docking(format!("{} has no entry socket", block.block_type)))?;
        check_compatible(&entry, &target)?;
        if entry.anchor.position.distance(target.anchor.position) > 1e-6
            || wrap_angle(entry.anchor.heading - target.anchor.heading).abs() > 1e-6
        {
            return Err(RoadError::Docking("block is not docked onto the target socket".into()));
        }
        self.open_sockets.remove(target_index);
        let idx = self.insert_block(block, Some(target.clone()), Some((target_index, target.clone())));
        let entry = self.blocks[idx].sockets[self.blocks[idx].sockets.iter().position(|s| s.direction == SocketDirection::Inbound).unwrap()].clone();
        for (from, to) in target.outgoing.iter().zip(entry.incoming.iter()) {
            self.lane_mut(*from)?.successors.push(*to);
            self.lane_mut(*to)?.predecessors.push(*from);
        }
        for (from, to) in entry.outgoing.iter().zip(target.incoming.iter()) {
            self.lane_mut(*from)?.successors.push(*to);
            self.lane_mut(*to)?.predecessors.push(*from);
        }
        Ok(())
    }

    /// Undo the most recent `append`.
    pub fn pop_last(&mut self) -> Result<BlockRecord, RoadError> {
        if self.blocks.len() < 2 {
            return Err(RoadError::Pop("cannot remove the root block".into()));
        }
        let rec = self.blocks.pop().unwrap();
        let first = rec.first_lane;
        let keep = self.lanes.len() - rec.lane_count as usize;
        self.lanes.truncate(keep);
        self.boundaries.truncate(keep);
        for lane in &mut self.lanes {
            lane.successors.retain(|id| id.0 < first);
            lane.predecessors.retain(|id| id.0 < first);
        }
        let n = self.open_sockets.len() - rec.pushed_sockets;
        self.open_sockets.truncate(n);
        if let Some((i, s)) = rec.consumed.clone() {
            self.open_sockets.insert(i, s);
        }
        self.next_id = first;
        Ok(rec)
    }

    pub(crate) fn boundary_segments(&self) -> impl Iterator<Item = (&Aabb, &[Segment])> {
        self.boundaries.iter().map(|b| (&b.bounds, b.segments.as_slice()))
    }
}

fn check_compatible(own: &Socket, target: &Socket) -> Result<(), RoadError> {
    if own.incoming.len() != target.outgoing.len() || own.outgoing.len() != target.incoming.len() {
        return Err(RoadError::Docking(format!(
            "lane counts differ: block {}+{} vs socket {}+{}",
            own.incoming.len(),
            own.outgoing.len(),
            target.outgoing.len(),
            target.incoming.len()
        )));
    }
    Ok(())
}

/// Rigidly move `block` so its socket `own` coincides with `target`, the
/// facing headings of the two sockets being opposite.
pub fn dock_socket(block: &Block, own: usize, target: &Socket) -> Result<Block, RoadError> {
    let socket = block
        .sockets
        .get(own)
        .ok_or_else(|| RoadError::Docking(format!("block has no socket {own}")))?;
    if socket.direction != SocketDirection::Inbound {
        return Err(RoadError::Docking("only inbound sockets can dock".into()));
    }
    if target.direction != SocketDirection::Outbound {
        return Err(RoadError::Docking("target socket must be outbound".into()));
    }
    check_compatible(socket, target)?;
    let t = Rigid2::between(socket.anchor, target.anchor);
    let mut docked = block.transformed(&t);
    // snap the anchor so the joint is exact rather than rounding-close
    docked.sockets[own].anchor = target.anchor;
    Ok(docked)
}

/// Whether any boundary of `candidate` comes within tolerance of a boundary
/// of `net`, ignoring contacts near the candidate's docking joint.
pub fn crossover_test(net: &RoadNetwork, candidate: &Block) -> bool {
    let joint = candidate.entry_socket().map(|s| {
        let (a, b) = s.cross_section();
        (Segment::new(a, b), candidate.road.lane_width)
    });
    let in_joint = |p: Vec2| joint.is_some_and(|(seg, r)| seg.distance_to_point(p) <= r);
    for lane in &candidate.lanes {
        let cache = boundary_cache(lane);
        let probe = cache.bounds.inflate(CROSSOVER_TOLERANCE);
        for (bounds, segments) in net.boundary_segments() {
            if !probe.intersects(bounds) {
                continue;
            }
            for a in &cache.segments {
                let ab = Aabb::from_points([a.a, a.b]).inflate(CROSSOVER_TOLERANCE);
                if !ab.intersects(bounds) {
                    continue;
                }
                for b in segments {
                    if ab.max.x < b.a.x.min(b.b.x)
                        || ab.min.x > b.a.x.max(b.b.x)
                        || ab.max.y < b.a.y.min(b.b.y)
                        || ab.min.y > b.a.y.max(b.b.y)
                    {
                        continue;
                    }
                    let (d, at) = a.distance_to_segment(b);
                    if d <= CROSSOVER_TOLERANCE && !in_joint(at) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn road() -> RoadSpec {
        RoadSpec {
            lanes_per_direction: 2,
            lane_width: 3.5,
        }
    }

    fn docked(net: &RoadNetwork, t: BlockType, params: &[f64], socket: usize) -> Block {
        let b = Block::build(t, params, net.road().unwrap()).unwrap();
        dock_socket(&b, b.entry_index().unwrap(), &net.open_sockets()[socket]).unwrap()
    }

    #[test]
    fn aligned_dock_is_pure_translation() {
        let b = Block::build(BlockType::Straight, &[50.0], &road()).unwrap();
        let mut target = b.sockets[1].clone();
        target.anchor = Pose::new(100.0, 0.0, 0.0);
        let d = dock_socket(&b, 0, &target).unwrap();
        let p = d.lanes[0].centerline.point_at(0.0, 0.0);
        let q = b.lanes[0].centerline.point_at(0.0, 0.0);
        assert_abs_diff_eq!(p.position.x - q.position.x, 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.position.y, q.position.y, epsilon = 1e-12);
        assert_abs_diff_eq!(p.heading, q.heading, epsilon = 1e-12);
    }

    #[test]
    fn rotated_anchor_is_rotated_back_then_translated() {
        // move the entry anchor to heading pi/2 in a copy of the block
        let b = Block::build(BlockType::Straight, &[50.0], &road()).unwrap();
        let pre = Rigid2 {
            rotation: FRAC_PI_2,
            translation: Vec2::new(3.0, -2.0),
        };
        let turned = b.transformed(&pre);
        let mut target = b.sockets[1].clone();
        target.anchor = Pose::new(100.0, 0.0, 0.0);
        let d = dock_socket(&turned, 0, &target).unwrap();
        // rigid-transform composition oracle: rotate by -pi/2 about the anchor,
        // then translate the anchor onto the target
        let oracle = |p: Vec2| (p - Vec2::new(3.0, -2.0)).rotate(-FRAC_PI_2) + Vec2::new(100.0, 0.0);
        for (orig, got) in turned.lanes.iter().zip(&d.lanes) {
            let a = oracle(orig.centerline.point_at(5.0, 0.3).position);
            let g = got.centerline.point_at(5.0, 0.3).position;
            assert_abs_diff_eq!(a.x, g.x, epsilon = 1e-9);
            assert_abs_diff_eq!(a.y, g.y, epsilon = 1e-9);
        }
    }

    #[test]
    fn docked_sockets_face_each_other() {
        let net = RoadNetwork::first_block(road());
        for t in [BlockType::Curve, BlockType::Roundabout, BlockType::Intersection] {
            let params: Vec<f64> = t.param_space().iter().map(|p| p.lo).collect();
            let d = docked(&net, t, &params, 0);
            let own = d.entry_socket().unwrap();
            let target = &net.open_sockets()[0];
            assert!(own.anchor.position.distance(target.anchor.position) <= 1e-9);
            assert!(wrap_angle(own.facing_heading() - target.facing_heading() - PI).abs() <= 1e-9);
        }
    }

    #[test]
    fn dock_rejects_mismatched_lane_counts() {
        let net = RoadNetwork::first_block(road());
        let b = Block::build(BlockType::Straight, &[50.0], &RoadSpec::default()).unwrap();
        let err = dock_socket(&b, 0, &net.open_sockets()[0]).unwrap_err();
        assert!(matches!(err, RoadError::Docking(_)));
        // outbound socket cannot be used as the block's own socket
        assert!(dock_socket(&b, 1, &net.open_sockets()[0]).is_err());
    }

    #[test]
    fn socket_bookkeeping_per_block_type() {
        for t in BlockType::RANDOM {
            let mut net = RoadNetwork::first_block(road());
            let before = net.open_sockets().len();
            let params: Vec<f64> = t.param_space().iter().map(|p| p.lo).collect();
            let d = docked(&net, t, &params, 0);
            assert!(!crossover_test(&net, &d), "{t} collides with the first block");
            net.append(d, 0).unwrap();
            assert_eq!(net.open_sockets().len(), before - 1 + (t.socket_count() - 1), "{t}");
        }
    }

    #[test]
    fn intersection_adds_two_open_sockets() {
        let mut net = RoadNetwork::first_block(road());
        let d = docked(&net, BlockType::Intersection, &[10.0, 20.0], 0);
        net.append(d, 0).unwrap();
        assert_eq!(net.open_sockets().len(), 3);
    }

    #[test]
    fn append_links_lanes_across_the_joint() {
        let mut net = RoadNetwork::first_block(road());
        let d = docked(&net, BlockType::Straight, &[50.0], 0);
        net.append(d, 0).unwrap();
        let first = &net.blocks()[0].sockets[0];
        for id in &first.outgoing {
            let lane = net.lane(*id).unwrap();
            assert_eq!(lane.successors.len(), 1);
            let next = net.lane(lane.successors[0]).unwrap();
            let a = lane.centerline.point_at(lane.length(), 0.0).position;
            let b = next.centerline.point_at(0.0, 0.0).position;
            assert!(a.distance(b) < 1e-9);
        }
    }

    #[test]
    fn pop_restores_previous_network() {
        let mut net = RoadNetwork::first_block(road());
        let d = docked(&net, BlockType::Straight, &[50.0], 0);
        net.append(d, 0).unwrap();
        let snapshot = (net.lanes().to_vec(), net.open_sockets().to_vec());
        let d = docked(&net, BlockType::Roundabout, &[25.0, 20.0, 20.0], 0);
        net.append(d, 0).unwrap();
        net.pop_last().unwrap();
        assert_eq!(net.lanes(), snapshot.0.as_slice());
        assert_eq!(net.open_sockets(), snapshot.1.as_slice());
    }

    #[test]
    fn popping_the_root_fails() {
        let mut net = RoadNetwork::first_block(road());
        assert!(matches!(net.pop_last(), Err(RoadError::Pop(_))));
    }

    #[test]
    fn crossover_detects_perpendicular_road() {
        let net = RoadNetwork::first_block(road());
        // a straight crossing the first block at x = 30, heading north
        let b = Block::build(BlockType::Straight, &[60.0], &road()).unwrap();
        let t = Rigid2 {
            rotation: FRAC_PI_2,
            translation: Vec2::new(30.0, -30.0),
        };
        assert!(crossover_test(&net, &b.transformed(&t)));
        // the same block far away does not collide
        let far = Rigid2 {
            rotation: FRAC_PI_2,
            translation: Vec2::new(30.0, 100.0),
        };
        assert!(!crossover_test(&net, &b.transformed(&far)));
    }

    #[test]
    fn crossover_is_conservative_for_near_tangent_boundaries() {
        let net = RoadNetwork::first_block(road());
        let half = road().half_width();
        let b = Block::build(BlockType::Straight, &[40.0], &road()).unwrap();
        // parallel road whose lower edge sits 0.5 mm above the first block's upper edge
        let t = Rigid2 {
            rotation: 0.0,
            translation: Vec2::new(10.0, 2.0 * half + 5e-4),
        };
        assert!(crossover_test(&net, &b.transformed(&t)));
        let t = Rigid2 {
            rotation: 0.0,
            translation: Vec2::new(10.0, 2.0 * half + 1e-2),
        };
        assert!(!crossover_test(&net, &b.transformed(&t)));
    }

    #[test]
    fn frenet_on_straight_first_block() {
        let net = RoadNetwork::first_block(road());
        // forward lane 0 runs along y = -1.75
        let f = net.world_to_frenet(Vec2::new(10.0, -1.25), None).unwrap();
        assert_eq!(f.lane, LaneId(0));
        assert_abs_diff_eq!(f.s, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.l, 0.5, epsilon = 1e-12);
        let f = net.world_to_frenet(Vec2::new(3.0, -1.75), None).unwrap();
        assert_abs_diff_eq!(f.l, 0.0, epsilon = 1e-12);
        assert!(matches!(
            net.world_to_frenet(Vec2::new(10.0, 50.0), None),
            Err(RoadError::OffNetwork { .. })
        ));
    }

    #[test]
    fn frenet_ties_go_to_lowest_id() {
        let a = Lane::new(LaneId(7), super::super::Centerline::straight(Pose::new(0.0, 0.0, 0.0), 20.0), 3.0);
        let b = Lane::new(LaneId(3), super::super::Centerline::straight(Pose::new(0.0, 0.0, 0.0), 20.0), 3.0);
        let net = RoadNetwork::from_lanes(vec![a, b]).unwrap();
        assert_eq!(net.world_to_frenet(Vec2::new(5.0, 0.2), None).unwrap().lane, LaneId(3));
    }

    #[test]
    fn from_lanes_rejects_dangling_references() {
        let mut a = Lane::new(LaneId(0), super::super::Centerline::straight(Pose::default(), 20.0), 3.0);
        a.successors.push(LaneId(9));
        assert!(matches!(RoadNetwork::from_lanes(vec![a]), Err(RoadError::Topology(_))));
    }
}
