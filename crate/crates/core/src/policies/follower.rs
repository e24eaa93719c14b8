use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::geom::Vec2;
use crate::roadnet::{LaneId, RoadError, RoadNetwork};

pub const LOOKAHEAD_MIN: f64 = 6.0;

/// Steering command in [-1, 1] that drives the rear axle through `target`.
pub fn pure_pursuit(state: &VehicleState, target: Vec2) -> f64 {
    let p = &state.params;
    let rear = state.rear_axle();
    let rel = (target - rear).rotate(-state.heading);
    let ld = rel.norm().max(1e-6);
    let sin_alpha = rel.y / ld;
    let delta = (2.0 * p.wheelbase * sin_alpha / ld).atan();
    (delta / p.max_steer).clamp(-1.0, 1.0)
}

/// Normalized throttle/brake realizing acceleration `a`.
pub fn throttle_for(state: &VehicleState, a: f64) -> f64 {
    let p = &state.params;
    if a >= 0.0 {
        (a / p.max_accel).min(1.0)
    } else {
        (a / p.max_brake).max(-1.0)
    }
}

/// Tracks a vehicle along a planned lane sequence. `lane` is the lane the
/// vehicle is on; `plan` holds the lanes after it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneFollower {
    pub lane: LaneId,
    pub plan: VecDeque<LaneId>,
    /// Longitudinal position on `lane` from the last localization.
    pub s: f64,
    pub l: f64,
}

impl LaneFollower {
    pub fn new(lane: LaneId, plan: impl IntoIterator<Item = LaneId>) -> Self {
        Self {
            lane,
            plan: plan.into_iter().collect(),
            s: 0.0,
            l: 0.0,
        }
    }

    /// Whether the next planned lane is a lateral neighbor.
    fn next_is_neighbor(&self, net: &RoadNetwork) -> bool {
        let Some(next) = self.plan.front() else { return false };
        net.lane(self.lane)
            .map(|l| l.left_neighbor == Some(*next) || l.right_neighbor == Some(*next))
            .unwrap_or(false)
    }

    /// Re-project `pos` onto the current lane, moving along the plan past
    /// lane ends and across neighbor hops.
    pub fn localize(&mut self, net: &RoadNetwork, pos: Vec2) -> Result<(), RoadError> {
        loop {
            if self.next_is_neighbor(net) {
                self.lane = self.plan.pop_front().unwrap();
                continue;
            }
            let lane = net.lane(self.lane)?;
            let (s, l) = lane.project(pos);
            self.s = s;
            self.l = l;
            if s > lane.length() && !self.plan.is_empty() {
                self.lane = self.plan.pop_front().unwrap();
                continue;
            }
            return Ok(());
        }
    }

    /// Distance left before the plan runs out.
    pub fn remaining(&self, net: &RoadNetwork) -> f64 {
        let mut d = net.lane(self.lane).map(|l| l.length()).unwrap_or(0.0) - self.s;
        for id in &self.plan {
            d += net.lane(*id).map(|l| l.length()).unwrap_or(0.0);
        }
        d
    }

    /// Lanes the vehicle will traverse, starting with the current one.
    pub fn path(&self) -> impl Iterator<Item = LaneId> + '_ {
        std::iter::once(self.lane).chain(self.plan.iter().copied())
    }

    /// Centerline point `ahead` meters past the current position along the
    /// plan, clamped at the plan's end.
    pub fn target_point(&self, net: &RoadNetwork, ahead: f64) -> Result<Vec2, RoadError> {
        let mut id = self.lane;
        let mut s = self.s.max(0.0) + ahead;
        let mut rest = self.plan.iter();
        loop {
            let lane = net.lane(id)?;
            if s <= lane.length() {
                return Ok(lane.centerline.point_at(s, 0.0).position);
            }
            match rest.next() {
                Some(next) => {
                    let is_neighbor = lane.left_neighbor == Some(*next) || lane.right_neighbor == Some(*next);
                    if !is_neighbor {
                        s -= lane.length();
                    }
                    id = *next;
                }
                None => return Ok(lane.centerline.point_at(lane.length(), 0.0).position),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step_vehicle, Action, BodyClass, VehicleParams, SUBSTEP};
    use crate::geom::Pose;
    use crate::roadnet::{Centerline, Lane, Turn};

    fn net() -> RoadNetwork {
        let mut a = Lane::new(LaneId(0), Centerline::straight(Pose::new(0.0, 0.0, 0.0), 30.0), 3.5);
        let mut b = Lane::new(LaneId(1), Centerline::arc(Pose::new(30.0, 0.0, 0.0), 30.0, Turn::Left, 1.5), 3.5);
        a.successors.push(LaneId(1));
        b.predecessors.push(LaneId(0));
        RoadNetwork::from_lanes(vec![a, b]).unwrap()
    }

    #[test]
    fn pursuit_tracks_a_curve() {
        let net = net();
        let mut f = LaneFollower::new(LaneId(0), [LaneId(1)]);
        let mut car = VehicleState::new(Pose::new(2.0, 0.0, 0.0), 8.0, VehicleParams::default(), BodyClass::Traffic);
        let mut worst: f64 = 0.0;
        for _ in 0..300 {
            f.localize(&net, car.position).unwrap();
            if f.plan.is_empty() && f.s > net.lane(f.lane).unwrap().length() - 8.0 {
                break;
            }
            worst = worst.max(f.l.abs());
            let t = f.target_point(&net, LOOKAHEAD_MIN.max(car.speed)).unwrap();
            let a = Action::new(pure_pursuit(&car, t), 0.0);
            car = step_vehicle(&car, a, SUBSTEP);
        }
        assert_eq!(f.lane, LaneId(1));
        assert!(worst < 0.5, "{worst}");
    }

    #[test]
    fn throttle_mapping() {
        let car = VehicleState::new(Pose::default(), 0.0, VehicleParams::default(), BodyClass::Traffic);
        assert_eq!(throttle_for(&car, 2.6), 1.0);
        assert_eq!(throttle_for(&car, -3.5), -0.5);
    }
}
