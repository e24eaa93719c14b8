//! Kinematic bicycle vehicles, static obstacle bodies and rectangle
//! collision detection.

use serde::{Deserialize, Serialize};

use crate::geom::{wrap_angle, Obb, Pose, Vec2};

/// Physics substep length.
pub const SUBSTEP: f64 = 0.02;
/// Substeps per decision step.
pub const SUBSTEPS: usize = 5;
/// One decision step.
pub const DECISION_DT: f64 = SUBSTEP * SUBSTEPS as f64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    /// rad
    pub max_steer: f64,
    pub max_accel: f64,
    pub max_brake: f64,
    /// rad/s
    pub steer_rate: f64,
    pub max_speed: f64,
    /// Linear speed decay coefficient (1/s) applied on top of the command.
    pub drag: f64,
    pub allow_reverse: bool,
    pub max_reverse_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            length: 4.5,
            width: 1.8,
            max_steer: 40f64.to_radians(),
            max_accel: 2.6,
            max_brake: 7.0,
            steer_rate: 120f64.to_radians(),
            max_speed: 40.0,
            drag: 0.0,
            allow_reverse: false,
            max_reverse_speed: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyClass {
    Ego,
    Traffic,
    ObstacleVehicle,
}

/// Vehicle body. `position` is the body center; the rear axle sits half a
/// wheelbase behind it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec2,
    pub heading: f64,
    /// Negative only when reversing is enabled.
    pub speed: f64,
    pub steering: f64,
    pub params: VehicleParams,
    pub class: BodyClass,
}

impl VehicleState {
    pub fn new(pose: Pose, speed: f64, params: VehicleParams, class: BodyClass) -> Self {
        Self {
            position: pose.position,
            heading: pose.heading,
            speed,
            steering: 0.0,
            params,
            class,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose {
            position: self.position,
            heading: self.heading,
        }
    }

    pub fn rear_axle(&self) -> Vec2 {
        self.position - Vec2::from_angle(self.heading) * (self.params.wheelbase / 2.0)
    }

    pub fn obb(&self) -> Obb {
        Obb::new(self.position, self.heading, self.params.length, self.params.width)
    }
}

/// Normalized control: steering and throttle (positive) or brake
/// (negative), both in [-1, 1]. Positive steering turns left.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub steering: f64,
    pub throttle_brake: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        steering: 0.0,
        throttle_brake: 0.0,
    };

    pub fn new(steering: f64, throttle_brake: f64) -> Self {
        Self {
            steering,
            throttle_brake,
        }
    }
}

/// Clamp both components to [-1, 1]. NaN becomes 0; the flag reports it.
pub fn clamp_action(steering: f64, throttle_brake: f64) -> (Action, bool) {
    let fix = |x: f64| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let bad = steering.is_nan() || throttle_brake.is_nan();
    if bad {
        log::warn!("NaN in action ({steering}, {throttle_brake}) replaced by 0");
    }
    (Action::new(fix(steering), fix(throttle_brake)), bad)
}

fn commanded_accel(p: &VehicleParams, v: f64, t: f64) -> f64 {
    let a = if t >= 0.0 {
        // throttle while rolling backwards acts as a brake
        if v < 0.0 {
            t * p.max_brake
        } else {
            t * p.max_accel
        }
    } else if v > 0.0 {
        t * p.max_brake
    } else if p.allow_reverse {
        t * p.max_accel
    } else {
        0.0
    };
    a - p.drag * v
}

/// Advance one vehicle by `dt` under `action`.
pub fn step_vehicle(state: &VehicleState, action: Action, dt: f64) -> VehicleState {
    let p = &state.params;
    let target = action.steering.clamp(-1.0, 1.0) * p.max_steer;
    let max_delta = p.steer_rate * dt;
    let steering = (state.steering + (target - state.steering).clamp(-max_delta, max_delta)).clamp(-p.max_steer, p.max_steer);

    let v0 = state.speed;
    let a = commanded_accel(p, v0, action.throttle_brake.clamp(-1.0, 1.0));
    let lo = if p.allow_reverse { -p.max_reverse_speed } else { 0.0 };
    let raw = v0 + a * dt;
    // the command may stop the car but never flips its direction within a step
    let crosses = (v0 > 0.0 && raw < 0.0) || (v0 < 0.0 && raw > 0.0);
    let (v1, ds) = if crosses {
        (0.0, v0 * (v0 / a).abs() / 2.0)
    } else {
        let v1 = raw.clamp(lo, p.max_speed);
        (v1, (v0 + v1) / 2.0 * dt)
    };

    let half = p.wheelbase / 2.0;
    let rear0 = state.position - Vec2::from_angle(state.heading) * half;
    let k = steering.tan() / p.wheelbase;
    let h0 = state.heading;
    let dh = ds * k;
    let rear1 = if dh.abs() < 1e-9 {
        rear0 + Vec2::from_angle(h0 + dh / 2.0) * ds
    } else {
        let r = 1.0 / k;
        rear0 + Vec2::new((h0 + dh).sin() - h0.sin(), h0.cos() - (h0 + dh).cos()) * r
    };
    let h1 = wrap_angle(h0 + dh);
    VehicleState {
        position: rear1 + Vec2::from_angle(h1) * half,
        heading: h1,
        speed: v1,
        steering,
        ..*state
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Cone,
    Barrier,
    BrokenVehicle,
}

impl ObstacleKind {
    /// Footprint (length, width) in meters.
    pub fn footprint(self) -> (f64, f64) {
        match self {
            ObstacleKind::Cone => (0.5, 0.5),
            ObstacleKind::Barrier => (0.6, 2.4),
            ObstacleKind::BrokenVehicle => (4.5, 1.8),
        }
    }
}

/// Static obstacle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleBody {
    pub kind: ObstacleKind,
    pub pose: Pose,
    pub half_length: f64,
    pub half_width: f64,
}

impl ObstacleBody {
    pub fn new(kind: ObstacleKind, pose: Pose) -> Self {
        let (l, w) = kind.footprint();
        Self {
            kind,
            pose,
            half_length: l / 2.0,
            half_width: w / 2.0,
        }
    }

    pub fn obb(&self) -> Obb {
        Obb::new(self.pose.position, self.pose.heading, 2.0 * self.half_length, 2.0 * self.half_width)
    }
}

/// All overlapping pairs `(a, b)` with `a < b`, sorted. Sweep-and-prune on
/// x followed by the separating-axis test.
pub fn collision_check<K: Copy + Ord>(bodies: &[(K, Obb)]) -> Vec<(K, K)> {
    let mut order: Vec<(f64, f64, usize)> = bodies
        .iter()
        .enumerate()
        .map(|(i, (_, b))| {
            let bb = b.aabb();
            (bb.min.x, bb.max.x, i)
        })
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    let mut out = Vec::new();
    for (n, &(_, max_x, i)) in order.iter().enumerate() {
        for &(min_x, _, j) in &order[n + 1..] {
            if min_x > max_x {
                break;
            }
            let (ki, bi) = &bodies[i];
            let (kj, bj) = &bodies[j];
            if ki != kj && bi.overlaps(bj) {
                out.push(if ki < kj { (*ki, *kj) } else { (*kj, *ki) });
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn car(speed: f64) -> VehicleState {
        VehicleState::new(Pose::new(0.0, 0.0, 0.0), speed, VehicleParams::default(), BodyClass::Ego)
    }

    #[test]
    fn standing_still_is_a_fixed_point() {
        let s = car(0.0);
        assert_eq!(step_vehicle(&s, Action::ZERO, 0.1), s);
    }

    #[test]
    fn straight_line_integration() {
        let s = step_vehicle(&car(10.0), Action::ZERO, 0.1);
        assert_abs_diff_eq!(s.position.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.position.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.speed, 10.0);
    }

    #[test]
    fn drag_slows_coasting_car() {
        let mut s = car(10.0);
        s.params.drag = 0.1;
        let s = step_vehicle(&s, Action::ZERO, 0.1);
        assert!(s.speed < 10.0 && s.speed > 9.8);
    }

    #[test]
    fn braking_stops_without_reversing() {
        let mut s = car(1.0);
        for _ in 0..20 {
            s = step_vehicle(&s, Action::new(0.0, -1.0), SUBSTEP);
        }
        assert_eq!(s.speed, 0.0);
        // stopping distance v^2 / (2 b)
        assert_abs_diff_eq!(s.position.x, 1.0 / 14.0, epsilon = 1e-12);
        let s2 = step_vehicle(&s, Action::new(0.0, -1.0), SUBSTEP);
        assert_eq!(s2.speed, 0.0);
    }

    #[test]
    fn reverse_when_enabled() {
        let mut s = car(0.0);
        s.params.allow_reverse = true;
        for _ in 0..50 {
            s = step_vehicle(&s, Action::new(0.0, -1.0), SUBSTEP);
        }
        assert!(s.speed < 0.0 && s.position.x < 0.0);
        assert!(s.speed >= -s.params.max_reverse_speed);
    }

    #[test]
    fn steering_is_rate_limited() {
        let s = step_vehicle(&car(5.0), Action::new(1.0, 0.0), SUBSTEP);
        assert_abs_diff_eq!(s.steering, 120f64.to_radians() * SUBSTEP, epsilon = 1e-12);
    }

    #[test]
    fn turning_circle_matches_wheelbase_over_tan() {
        for (v, frac) in [(3.0, 0.3), (8.0, 0.6), (12.0, 1.0)] {
            let mut s = car(v);
            s.steering = frac * s.params.max_steer;
            let r = s.params.wheelbase / s.steering.tan();
            let steps = (2.0 * std::f64::consts::PI * r / v / SUBSTEP).ceil() as usize;
            let mut pts = Vec::new();
            for _ in 0..steps {
                s = step_vehicle(&s, Action::new(frac, 0.0), SUBSTEP);
                pts.push(s.rear_axle());
            }
            let center = Vec2::new(-s.params.wheelbase / 2.0, r);
            for p in pts {
                assert!((p.distance(center) - r).abs() / r < 0.01);
            }
        }
    }

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp_action(2.0, -3.0), (Action::new(1.0, -1.0), false));
        assert_eq!(clamp_action(0.5, 0.5), (Action::new(0.5, 0.5), false));
        assert_eq!(clamp_action(f64::NAN, 0.0), (Action::new(0.0, 0.0), true));
    }

    #[test]
    fn collision_examples() {
        let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 1.0, 1.0);
        let b = Obb::new(Vec2::new(10.0, 0.0), 0.0, 1.0, 1.0);
        assert!(collision_check(&[(1u32, a), (2, b)]).is_empty());
        assert_eq!(collision_check(&[(1u32, a), (2, a)]), vec![(1, 2)]);
        assert_eq!(collision_check(&[(2u32, a), (1, a), (3, b)]), vec![(1, 2)]);
    }
}
