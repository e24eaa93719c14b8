use super::world::World;
use super::ObjectId;
use crate::dynamics::{Action, VehicleState};
use crate::policies::{idm_acceleration, pure_pursuit, throttle_for, IdmOutput, IdmParams, LaneFollower, LOOKAHEAD_MIN};
use crate::roadnet::LaneId;

/// How far ahead car-following looks for a leader.
pub const LEADER_HORIZON: f64 = 80.0;
/// Pure-pursuit lookahead per m/s of speed.
pub const EXPERT_LOOKAHEAD_GAIN: f64 = 0.8;

/// Nearest body ahead of `me` along `path` (starting on `path[0]` at `s`)
/// as bumper-to-bumper gap and speed. Neighbor hops in the path keep the
/// longitudinal coordinate.
pub fn leader_on_path(world: &World, me: ObjectId, half_length: f64, path: &[LaneId], s: f64) -> Option<(f64, f64)> {
    let net = &world.net;
    let mut offset = 0.0;
    let mut from = s;
    for (k, &id) in path.iter().enumerate() {
        let Ok(lane) = net.lane(id) else { break };
        if k > 0 {
            let prev = net.lane(path[k - 1]).ok()?;
            let neighbor = prev.left_neighbor == Some(id) || prev.right_neighbor == Some(id);
            if neighbor {
                from = from / prev.length() * lane.length();
            } else {
                offset += prev.length() - from;
                from = 0.0;
            }
        }
        let ahead = world
            .occupants(id)
            .iter()
            .find(|o| o.id != me && (k > 0 || o.s > from));
        if let Some(o) = ahead {
            let gap = offset + (o.s - from) - half_length - o.half_length;
            return Some((gap, o.speed));
        }
        if offset + lane.length() - from > LEADER_HORIZON {
            break;
        }
    }
    None
}

/// Command that tracks the follower's path with pure pursuit and sets the
/// speed by IDM behind the nearest leader.
pub fn follow_command(world: &World, id: ObjectId, state: &VehicleState, follower: &LaneFollower, idm: &IdmParams) -> (Action, IdmOutput) {
    let ahead = LOOKAHEAD_MIN.max(EXPERT_LOOKAHEAD_GAIN * state.speed + 2.0);
    let steering = match follower.target_point(&world.net, ahead) {
        Ok(t) => pure_pursuit(state, t),
        Err(_) => 0.0,
    };
    let path: Vec<LaneId> = follower.path().take(6).collect();
    let leader = leader_on_path(world, id, state.params.length / 2.0, &path, follower.s);
    let out = idm_acceleration(state.speed, leader, idm);
    (Action::new(steering, throttle_for(state, out.accel)), out)
}
