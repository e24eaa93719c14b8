//! Lidar and the flat observation vector handed to external policies.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleState;
use crate::geom::{ray_segment, wrap_angle, Obb, Pose, Segment, Vec2};
use crate::rng::SimRng;
use crate::roadnet::{Frenet, Route};

pub const EGO_DIM: usize = 5;
pub const NAV_DIM: usize = 4;
/// Checkpoint offsets are divided by this before clipping.
pub const NAV_SCALE: f64 = 50.0;
pub const CHECKPOINT_RADIUS: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LidarConfig {
    pub num_rays: usize,
    pub max_range: f64,
    /// Amplitude of additive uniform noise on normalized readings.
    pub noise: f64,
    /// Whether road-edge curbs reflect rays.
    pub hit_sidewalks: bool,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            num_rays: 240,
            max_range: 50.0,
            noise: 0.0,
            hit_sidewalks: false,
        }
    }
}

impl LidarConfig {
    pub fn marl() -> Self {
        Self {
            num_rays: 72,
            ..Self::default()
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.num_rays + EGO_DIM + NAV_DIM
    }
}

/// Unit direction of ray `i` for an ego heading.
pub fn ray_angle(heading: f64, i: usize, n: usize) -> f64 {
    heading + TAU * i as f64 / n as f64
}

struct Scan<'a> {
    origin: Vec2,
    heading: f64,
    n: usize,
    range: f64,
    dirs: &'a [Vec2],
    hits: Vec<f64>,
}

impl Scan<'_> {
    /// Cast the rays whose direction can reach a disc of radius `r` at
    /// `center` against `edges`.
    fn cast(&mut self, center: Vec2, r: f64, edges: &[Segment]) {
        let rel = center - self.origin;
        let d = rel.norm();
        if d - r > self.range {
            return;
        }
        let step = TAU / self.n as f64;
        let (first, count) = if d <= r {
            (0, self.n)
        } else {
            let half = (r / d).asin();
            let mid = wrap_angle(rel.angle() - self.heading).rem_euclid(TAU);
            let lo = ((mid - half) / step).floor() as i64;
            let hi = ((mid + half) / step).ceil() as i64;
            (lo, ((hi - lo + 1) as usize).min(self.n))
        };
        for k in 0..count {
            let i = (first + k as i64).rem_euclid(self.n as i64) as usize;
            let dir = self.dirs[i];
            for e in edges {
                if let Some(t) = ray_segment(self.origin, dir, e) {
                    if t < self.hits[i] {
                        self.hits[i] = t;
                    }
                }
            }
        }
    }
}

/// Normalized lidar returns in [0, 1] for a sensor at `origin`. Ray `i`
/// points at `origin.heading + 2 pi i / n`.
pub fn lidar_scan<'b>(
    cfg: &LidarConfig,
    origin: Pose,
    bodies: impl IntoIterator<Item = &'b Obb>,
    walls: &[Segment],
    rng: Option<&mut SimRng>,
) -> Vec<f64> {
    let n = cfg.num_rays;
    let dirs: Vec<Vec2> = (0..n).map(|i| Vec2::from_angle(ray_angle(origin.heading, i, n))).collect();
    let mut scan = Scan {
        origin: origin.position,
        heading: origin.heading,
        n,
        range: cfg.max_range,
        dirs: &dirs,
        hits: vec![cfg.max_range; n],
    };
    for b in bodies {
        let edges = b.edges();
        scan.cast(b.center, b.bounding_radius(), &edges);
    }
    for w in walls {
        let mid = w.a.lerp(w.b, 0.5);
        scan.cast(mid, w.a.distance(w.b) / 2.0, std::slice::from_ref(w));
    }
    let mut out: Vec<f64> = scan.hits.iter().map(|h| h.min(cfg.max_range) / cfg.max_range).collect();
    if cfg.noise > 0.0 {
        if let Some(rng) = rng {
            for v in &mut out {
                *v = (*v + cfg.noise * (2.0 * rng.random::<f64>() - 1.0)).clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Steering, heading error, speed and distances to the lane's left and
/// right boundaries, each clipped to [-1, 1].
pub fn ego_state_vector(ego: &VehicleState, frenet: &Frenet, lane_heading: f64, lane_width: f64, v_max: f64) -> [f64; EGO_DIM] {
    let c = |x: f64| x.clamp(-1.0, 1.0);
    let half = lane_width / 2.0;
    [
        c(ego.steering / ego.params.max_steer),
        c(wrap_angle(ego.heading - lane_heading) / PI),
        c(ego.speed / v_max),
        c((half - frenet.l) / lane_width),
        c((half + frenet.l) / lane_width),
    ]
}

/// Checkpoint bookkeeping along a route.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Navigation {
    /// Index of the first uncompleted checkpoint.
    pub next: usize,
}

impl Navigation {
    /// Mark checkpoints completed by proximity or by route progress.
    pub fn update(&mut self, route: &Route, position: Vec2, progress: f64) {
        while self.next < route.checkpoints.len() {
            let (p, d) = route.checkpoints[self.next];
            if position.distance(p) <= CHECKPOINT_RADIUS || progress >= d {
                self.next += 1;
            } else {
                break;
            }
        }
    }

    /// The next two uncompleted checkpoints; past the end both are the
    /// destination.
    pub fn targets(&self, route: &Route) -> [Vec2; 2] {
        let last = route.checkpoints.len() - 1;
        let a = self.next.min(last);
        let b = (self.next + 1).min(last);
        [route.checkpoints[a].0, route.checkpoints[b].0]
    }
}

/// Checkpoints in the ego frame, scaled by 50 m and clipped.
pub fn navigation_obs(targets: [Vec2; 2], ego: Pose) -> [f64; NAV_DIM] {
    let mut out = [0.0; NAV_DIM];
    for (k, t) in targets.iter().enumerate() {
        let local = ego.to_local(*t);
        out[2 * k] = (local.x / NAV_SCALE).clamp(-1.0, 1.0);
        out[2 * k + 1] = (local.y / NAV_SCALE).clamp(-1.0, 1.0);
    }
    out
}

/// lidar, then ego state, then navigation.
pub fn assemble_observation(lidar: &[f64], ego: &[f64; EGO_DIM], nav: &[f64; NAV_DIM]) -> Vec<f64> {
    let mut v = Vec::with_capacity(lidar.len() + EGO_DIM + NAV_DIM);
    v.extend_from_slice(lidar);
    v.extend_from_slice(ego);
    v.extend_from_slice(nav);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{BodyClass, VehicleParams};
    use crate::roadnet::LaneId;
    use approx::assert_abs_diff_eq;

    fn origin() -> Pose {
        Pose::new(0.0, 0.0, 0.0)
    }

    #[test]
    fn empty_world_reads_one() {
        let v = lidar_scan(&LidarConfig::default(), origin(), [], &[], None);
        assert_eq!(v.len(), 240);
        assert!(v.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn wall_ahead_at_half_range() {
        let wall = Segment::new(Vec2::new(25.0, -10.0), Vec2::new(25.0, 10.0));
        let v = lidar_scan(&LidarConfig::default(), origin(), [], &[wall], None);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-12);
        assert_eq!(v[120], 1.0);
        let body = Obb::new(Vec2::new(26.0, 0.0), 0.0, 2.0, 2.0);
        let v = lidar_scan(&LidarConfig::default(), origin(), [&body], &[], None);
        assert_abs_diff_eq!(v[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn beyond_range_reads_one() {
        let body = Obb::new(Vec2::new(60.0, 0.0), 0.0, 2.0, 2.0);
        let v = lidar_scan(&LidarConfig::default(), origin(), [&body], &[], None);
        assert!(v.iter().all(|x| *x == 1.0));
    }

    #[test]
    fn body_behind_wraps_ray_indices() {
        // a box straddling heading +-pi must be seen by rays on both sides
        let body = Obb::new(Vec2::new(-10.0, 0.0), 0.0, 2.0, 6.0);
        let v = lidar_scan(&LidarConfig::default(), origin(), [&body], &[], None);
        assert!(v[119] < 1.0 && v[120] < 1.0 && v[121] < 1.0);
        let body = Obb::new(Vec2::new(10.0, 0.0), 0.0, 2.0, 6.0);
        let v = lidar_scan(&LidarConfig::default(), origin(), [&body], &[], None);
        assert!(v[239] < 1.0 && v[0] < 1.0 && v[1] < 1.0);
    }

    fn ego(speed: f64) -> VehicleState {
        VehicleState::new(origin(), speed, VehicleParams::default(), BodyClass::Ego)
    }

    #[test]
    fn ego_vector_symmetric_case() {
        let f = Frenet { lane: LaneId(0), s: 5.0, l: 0.0 };
        let v_max = 80.0 / 3.6;
        let e = ego_state_vector(&ego(v_max), &f, 0.0, 3.5, v_max);
        assert_eq!(e[1], 0.0);
        assert_eq!(e[2], 1.0);
        assert_eq!(e[3], 0.5);
        assert_eq!(e[3], e[4]);
        let f = Frenet { l: 1.75, ..f };
        let e = ego_state_vector(&ego(40.0 / 3.6), &f, 0.0, 3.5, v_max);
        assert_eq!(e[3], 0.0);
        assert_abs_diff_eq!(e[2], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn navigation_frame_transform() {
        let ahead = navigation_obs([Vec2::new(50.0, 0.0), Vec2::new(-10.0, 0.0)], origin());
        assert_eq!(ahead, [1.0, 0.0, -0.2, 0.0]);
        let rotated = navigation_obs([Vec2::new(0.0, 50.0); 2], Pose::new(0.0, 0.0, PI / 2.0));
        assert_abs_diff_eq!(rotated[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rotated[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dimensions() {
        assert_eq!(LidarConfig::default().observation_dim(), 249);
        assert_eq!(LidarConfig::marl().observation_dim(), 81);
    }
}
