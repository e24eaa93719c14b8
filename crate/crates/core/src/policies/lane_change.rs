use super::idm::{idm_acceleration, IdmParams};

/// Minimum own-acceleration gain that justifies a lane change.
pub const MOBIL_THRESHOLD: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaneChange {
    Keep,
    Left,
    Right,
}

/// Traffic around one side of the vehicle. Gaps are bumper to bumper.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LaneOption {
    pub leader: Option<(f64, f64)>,
    /// Follower gap and speed in the target lane.
    pub follower: Option<(f64, f64)>,
}

/// MOBIL-style decision: change when the own IDM acceleration improves by
/// more than the threshold and the new follower need not brake harder than
/// the comfortable deceleration. Ties keep the lane; left wins a tie
/// between sides.
pub fn lane_change_decision(
    v: f64,
    current_leader: Option<(f64, f64)>,
    left: Option<LaneOption>,
    right: Option<LaneOption>,
    p: &IdmParams,
) -> LaneChange {
    let base = idm_acceleration(v, current_leader, p).accel;
    let mut best = (LaneChange::Keep, MOBIL_THRESHOLD);
    for (dir, opt) in [(LaneChange::Left, left), (LaneChange::Right, right)] {
        let Some(opt) = opt else { continue };
        if let Some((gap, vf)) = opt.follower {
            if gap <= 0.0 || idm_acceleration(vf, Some((gap, v)), p).accel < -p.decel {
                continue;
            }
        }
        if opt.leader.is_some_and(|(gap, _)| gap <= 0.0) {
            continue;
        }
        let gain = idm_acceleration(v, opt.leader, p).accel - base;
        if gain > best.1 {
            best = (dir, gain);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_road_keeps_lane() {
        let p = IdmParams::default();
        let clear = Some(LaneOption::default());
        assert_eq!(lane_change_decision(8.0, None, clear, clear, &p), LaneChange::Keep);
    }

    #[test]
    fn slow_leader_triggers_change_to_empty_lane() {
        let p = IdmParams::default();
        // 3-vehicle fixture: ego at 8 m/s, slow leader 15 m ahead at 2 m/s,
        // a car 40 m ahead in the right lane at 8 m/s, left lane empty
        let leader = Some((15.0, 2.0));
        let base = idm_acceleration(8.0, leader, &p).accel;
        let left = LaneOption::default();
        let right = LaneOption {
            leader: Some((40.0, 8.0)),
            follower: None,
        };
        let gain_left = idm_acceleration(8.0, None, &p).accel - base;
        let gain_right = idm_acceleration(8.0, right.leader, &p).accel - base;
        assert!(gain_left > gain_right && gain_left > MOBIL_THRESHOLD);
        assert_eq!(lane_change_decision(8.0, leader, Some(left), Some(right), &p), LaneChange::Left);
    }

    #[test]
    fn occupied_alongside_vetoes() {
        let p = IdmParams::default();
        let leader = Some((15.0, 2.0));
        let blocked = LaneOption {
            leader: None,
            follower: Some((-1.0, 8.0)),
        };
        assert_eq!(lane_change_decision(8.0, leader, Some(blocked), None, &p), LaneChange::Keep);
        // a fast follower right behind would have to brake hard
        let close = LaneOption {
            leader: None,
            follower: Some((3.0, 12.0)),
        };
        assert_eq!(lane_change_decision(8.0, leader, Some(close), None, &p), LaneChange::Keep);
    }
}
