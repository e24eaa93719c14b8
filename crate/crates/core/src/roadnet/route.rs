use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::lane::LaneId;
use super::network::{Destination, RoadNetwork};
use super::RoadError;
use crate::geom::Vec2;

/// Distance between navigation checkpoints along a route.
pub const CHECKPOINT_SPACING: f64 = 50.0;

/// A lane sequence from a start lane to a destination. Consecutive lanes
/// are joined either by a successor link or by a lateral neighbor link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub lanes: Vec<LaneId>,
    /// Route distance at s = 0 of each lane. Neighbor hops add nothing.
    pub offsets: Vec<f64>,
    pub destination: Destination,
    /// Route distance of the destination.
    pub length: f64,
    /// Checkpoint positions and their route distances.
    pub checkpoints: Vec<(Vec2, f64)>,
}

impl Route {
    pub fn index_of(&self, lane: LaneId) -> Option<usize> {
        self.lanes.iter().position(|l| *l == lane)
    }

    /// Route distance of a Frenet position on a route lane.
    pub fn progress(&self, lane: LaneId, s: f64) -> Option<f64> {
        self.index_of(lane).map(|i| self.offsets[i] + s)
    }

    /// Index of the first checkpoint strictly ahead of `progress`.
    pub fn next_checkpoint(&self, progress: f64) -> usize {
        self.checkpoints
            .iter()
            .position(|(_, d)| *d > progress)
            .unwrap_or(self.checkpoints.len().saturating_sub(1))
    }
}

/// Shortest route in lane hops from `start` to the destination. Among equal
/// hop counts the lexicographically smallest lane-id sequence wins.
pub fn route_search(net: &RoadNetwork, start: LaneId, destination: Destination) -> Result<Route, RoadError> {
    net.lane(start)?;
    let goal = destination.lane;
    net.lane(goal)?;
    // reverse BFS: dist[x] = hops from x to goal
    let mut dist: BTreeMap<LaneId, usize> = BTreeMap::new();
    dist.insert(goal, 0);
    let mut queue = VecDeque::from([goal]);
    while let Some(id) = queue.pop_front() {
        let d = dist[&id];
        let lane = net.lane(id)?;
        let into = lane
            .predecessors
            .iter()
            .chain(lane.left_neighbor.iter())
            .chain(lane.right_neighbor.iter());
        for &p in into {
            if !dist.contains_key(&p) {
                dist.insert(p, d + 1);
                queue.push_back(p);
            }
        }
    }
    if !dist.contains_key(&start) {
        return Err(RoadError::Unreachable { from: start, to: goal });
    }
    let mut lanes = vec![start];
    let mut offsets = vec![0.0];
    let mut cur = start;
    while cur != goal {
        let lane = net.lane(cur)?;
        let want = dist[&cur] - 1;
        let mut options: Vec<(LaneId, bool)> = lane.successors.iter().map(|s| (*s, true)).collect();
        options.extend(lane.left_neighbor.iter().chain(lane.right_neighbor.iter()).map(|n| (*n, false)));
        options.sort_by_key(|(id, _)| *id);
        let (next, successor) = options
            .into_iter()
            .find(|(id, _)| dist.get(id) == Some(&want))
            .expect("BFS distances are consistent");
        let off = offsets.last().unwrap() + if successor { lane.length() } else { 0.0 };
        lanes.push(next);
        offsets.push(off);
        cur = next;
    }
    let length = offsets.last().unwrap() + destination.s;
    let mut checkpoints = Vec::new();
    let mut d = CHECKPOINT_SPACING;
    while d < length {
        checkpoints.push((point_at_progress(net, &lanes, &offsets, d)?, d));
        d += CHECKPOINT_SPACING;
    }
    let dest_pos = net.lane(goal)?.point_at(destination.s, 0.0)?.position;
    checkpoints.push((dest_pos, length));
    Ok(Route {
        lanes,
        offsets,
        destination,
        length,
        checkpoints,
    })
}

fn point_at_progress(net: &RoadNetwork, lanes: &[LaneId], offsets: &[f64], d: f64) -> Result<Vec2, RoadError> {
    // last lane whose span contains d
    for i in (0..lanes.len()).rev() {
        let lane = net.lane(lanes[i])?;
        let s = d - offsets[i];
        if s >= 0.0 && s <= lane.length() {
            return Ok(lane.point_at(s, 0.0)?.position);
        }
    }
    let lane = net.lane(*lanes.last().unwrap())?;
    let s = (d - offsets.last().unwrap()).clamp(0.0, lane.length());
    Ok(lane.point_at(s, 0.0)?.position)
}
