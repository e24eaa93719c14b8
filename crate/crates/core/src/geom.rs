//! Planar geometry shared by the road network, dynamics and sensors.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector pointing along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Vec2, t: f64) -> Vec2 {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Position plus heading (radians, counter-clockwise from +x).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec2,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: Vec2::new(x, y),
            heading,
        }
    }

    pub fn direction(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    /// Unit normal pointing to the left of the heading.
    pub fn left(&self) -> Vec2 {
        self.direction().perp()
    }

    /// Express a world point in this pose's frame (x forward, y left).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.position).rotate(-self.heading)
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Rotation about the origin followed by a translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rigid2 {
    pub rotation: f64,
    pub translation: Vec2,
}

impl Rigid2 {
    pub const IDENTITY: Rigid2 = Rigid2 {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    /// The transform carrying `from` onto `to` (positions and headings).
    pub fn between(from: Pose, to: Pose) -> Self {
        let rotation = to.heading - from.heading;
        let translation = to.position - from.position.rotate(rotation);
        Self {
            rotation,
            translation,
        }
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.rotation) + self.translation
    }

    pub fn apply_pose(&self, p: Pose) -> Pose {
        Pose {
            position: self.apply(p.position),
            heading: wrap_angle(p.heading + self.rotation),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    /// Closest point on the segment to `p` and its parameter in [0, 1].
    pub fn closest_point(&self, p: Vec2) -> (Vec2, f64) {
        let d = self.b - self.a;
        let len2 = d.norm_sq();
        if len2 == 0.0 {
            return (self.a, 0.0);
        }
        let t = ((p - self.a).dot(d) / len2).clamp(0.0, 1.0);
        (self.a + d * t, t)
    }

    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        self.closest_point(p).0.distance(p)
    }

    /// Minimum distance between two segments together with the midpoint of
    /// the closest pair of points.
    pub fn distance_to_segment(&self, o: &Segment) -> (f64, Vec2) {
        if let Some(p) = self.intersection(o) {
            return (0.0, p);
        }
        let candidates = [
            (o.closest_point(self.a).0, self.a),
            (o.closest_point(self.b).0, self.b),
            (self.closest_point(o.a).0, o.a),
            (self.closest_point(o.b).0, o.b),
        ];
        let mut best = (f64::INFINITY, Vec2::ZERO);
        for (p, q) in candidates {
            let d = p.distance(q);
            if d < best.0 {
                best = (d, p.lerp(q, 0.5));
            }
        }
        best
    }

    /// Proper or touching intersection point, if any. Collinear overlaps
    /// report one of the shared endpoints.
    pub fn intersection(&self, o: &Segment) -> Option<Vec2> {
        let r = self.b - self.a;
        let s = o.b - o.a;
        let denom = r.cross(s);
        let qp = o.a - self.a;
        if denom == 0.0 {
            if qp.cross(r) != 0.0 {
                return None;
            }
            // collinear: check projections overlap
            let rr = r.norm_sq();
            if rr == 0.0 {
                return (o.distance_to_point(self.a) == 0.0).then_some(self.a);
            }
            let t0 = qp.dot(r) / rr;
            let t1 = t0 + s.dot(r) / rr;
            let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
            if hi < 0.0 || lo > 1.0 {
                return None;
            }
            return Some(self.a + r * lo.max(0.0));
        }
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            Some(self.a + r * t)
        } else {
            None
        }
    }
}

/// Distance along a ray (unit `dir`) to a segment, if it is hit.
pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let s = seg.b - seg.a;
    let denom = dir.cross(s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let qp = seg.a - origin;
    let t = qp.cross(s) / denom;
    let u = qp.cross(dir) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec2::new(f64::INFINITY, f64::INFINITY),
        max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_points<I: IntoIterator<Item = Vec2>>(points: I) -> Self {
        let mut b = Aabb::EMPTY;
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(o.min);
        b.include(o.max);
        b
    }

    pub fn inflate(&self, m: f64) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x - m, self.min.y - m),
            max: Vec2::new(self.max.x + m, self.max.y + m),
        }
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// Oriented rectangle: center, heading and half extents along / across it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            heading,
            half_length: length / 2.0,
            half_width: width / 2.0,
        }
    }

    pub fn axes(&self) -> (Vec2, Vec2) {
        let u = Vec2::from_angle(self.heading);
        (u, u.perp())
    }

    /// Corners in counter-clockwise order starting front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let (u, v) = self.axes();
        let fu = u * self.half_length;
        let fv = v * self.half_width;
        let c = self.center;
        [c + fu - fv, c + fu + fv, c - fu + fv, c - fu - fv]
    }

    pub fn edges(&self) -> [Segment; 4] {
        let k = self.corners();
        [
            Segment::new(k[0], k[1]),
            Segment::new(k[1], k[2]),
            Segment::new(k[2], k[3]),
            Segment::new(k[3], k[0]),
        ]
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let (u, v) = self.axes();
        let d = p - self.center;
        d.dot(u).abs() <= self.half_length && d.dot(v).abs() <= self.half_width
    }

    fn projected_radius(&self, axis: Vec2) -> f64 {
        let (u, v) = self.axes();
        self.half_length * u.dot(axis).abs() + self.half_width * v.dot(axis).abs()
    }

    /// Separating-axis overlap test. Touching rectangles count as overlapping.
    pub fn overlaps(&self, o: &Obb) -> bool {
        let reach = self.bounding_radius() + o.bounding_radius();
        let d = o.center - self.center;
        if d.norm_sq() > reach * reach {
            return false;
        }
        let (u1, v1) = self.axes();
        let (u2, v2) = o.axes();
        [u1, v1, u2, v2].into_iter().all(|axis| {
            d.dot(axis).abs() <= self.projected_radius(axis) + o.projected_radius(axis)
        })
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.corners())
    }
}
