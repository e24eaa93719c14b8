use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::RoadError;
use crate::geom::{wrap_angle, Aabb, Pose, Rigid2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LaneId(pub u32);

impl fmt::Display for LaneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "lane#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineType {
    Broken,
    Continuous,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Left,
    Right,
}

impl Turn {
    /// +1 for left (counter-clockwise), -1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Turn::Left => 1.0,
            Turn::Right => -1.0,
        }
    }

    pub fn flip(self) -> Turn {
        match self {
            Turn::Left => Turn::Right,
            Turn::Right => Turn::Left,
        }
    }
}

/// Where a lane sits in the road graph. Junction connectors do not carry
/// spawn slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneKind {
    Road,
    Junction,
}

/// Piecewise-linear centerline with cumulative arc length.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Result<Self, RoadError> {
        if points.len() < 2 {
            return Err(RoadError::Geometry("polyline needs at least two points".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            let d = w[0].distance(w[1]);
            if !(d > 0.0) {
                return Err(RoadError::Geometry("polyline has repeated or non-finite points".into()));
            }
            acc += d;
            cumulative.push(acc);
        }
        Ok(Self { points, cumulative })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn segment_index(&self, s: f64) -> usize {
        let n = self.points.len() - 1;
        match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    fn point_at(&self, s: f64, l: f64) -> Pose {
        let i = self.segment_index(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        let dir = (b - a) * (1.0 / (self.cumulative[i + 1] - self.cumulative[i]));
        let p = a + dir * (s - self.cumulative[i]) + dir.perp() * l;
        Pose {
            position: p,
            heading: dir.angle(),
        }
    }

    fn project(&self, p: Vec2) -> (f64, f64) {
        let n = self.points.len() - 1;
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let seg_len = self.cumulative[i + 1] - self.cumulative[i];
            let dir = (b - a) * (1.0 / seg_len);
            let rel = p - a;
            let mut t = rel.dot(dir);
            // the end segments extend past the polyline so out-of-range
            // points still get a signed longitudinal coordinate
            if i > 0 {
                t = t.max(0.0);
            }
            if i + 1 < n {
                t = t.min(seg_len);
            }
            let foot = a + dir * t;
            let dist = foot.distance(p);
            if dist < best.0 {
                best = (dist, self.cumulative[i] + t, dir.cross(rel));
            }
        }
        (best.1, best.2)
    }

    fn transformed(&self, t: &Rigid2) -> Polyline {
        Polyline {
            points: self.points.iter().map(|p| t.apply(*p)).collect(),
            cumulative: self.cumulative.clone(),
        }
    }
}

/// Lane reference curve. Arcs are parameterized by their start pose; the
/// lane travels in the direction of the start heading.
#[derive(Clone, Debug, PartialEq)]
pub enum Centerline {
    Straight { start: Pose, length: f64 },
    Arc { start: Pose, radius: f64, turn: Turn, length: f64 },
    Polyline(Polyline),
}

impl Centerline {
    pub fn straight(start: Pose, length: f64) -> Self {
        Centerline::Straight { start, length }
    }

    pub fn arc(start: Pose, radius: f64, turn: Turn, angle: f64) -> Self {
        Centerline::Arc {
            start,
            radius,
            turn,
            length: radius * angle,
        }
    }

    pub fn length(&self) -> f64 {
        match self {
            Centerline::Straight { length, .. } | Centerline::Arc { length, .. } => *length,
            Centerline::Polyline(p) => p.length(),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Centerline::Polyline(_))
    }

    fn arc_center(start: &Pose, radius: f64, turn: Turn) -> Vec2 {
        start.position + start.left() * (turn.sign() * radius)
    }

    /// Pose at longitudinal `s` and lateral `l` (positive left). `s` is not
    /// range checked; see [`Lane::point_at`].
    pub fn point_at(&self, s: f64, l: f64) -> Pose {
        match self {
            Centerline::Straight { start, .. } => Pose {
                position: start.position + start.direction() * s + start.left() * l,
                heading: start.heading,
            },
            Centerline::Arc {
                start, radius, turn, ..
            } => {
                let sign = turn.sign();
                let center = Self::arc_center(start, *radius, *turn);
                let heading = start.heading + sign * s / radius;
                // vector from center to the centerline point
                let radial = Vec2::new(heading.sin(), -heading.cos()) * (sign * radius);
                let left = Vec2::from_angle(heading).perp();
                Pose {
                    position: center + radial + left * l,
                    heading: wrap_angle(heading),
                }
            }
            Centerline::Polyline(p) => p.point_at(s, l),
        }
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.point_at(s, 0.0).heading
    }

    /// Signed curvature (positive left) at `s`.
    pub fn curvature_at(&self, _s: f64) -> f64 {
        match self {
            Centerline::Arc { radius, turn, .. } => turn.sign() / radius,
            _ => 0.0,
        }
    }

    /// Frenet coordinates of `p`. The returned `s` may fall outside
    /// `[0, length]` when the point lies beyond an end of the curve.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        match self {
            Centerline::Straight { start, .. } => {
                let rel = p - start.position;
                (rel.dot(start.direction()), rel.dot(start.left()))
            }
            Centerline::Arc {
                start,
                radius,
                turn,
                length,
            } => {
                let sign = turn.sign();
                let center = Self::arc_center(start, *radius, *turn);
                let d = p - center;
                let rho = d.norm();
                // heading of the tangent at the foot point
                let theta = d.angle() + sign * std::f64::consts::FRAC_PI_2;
                let delta = (sign * (theta - start.heading)).rem_euclid(TAU);
                let after = radius * delta - length;
                let before = radius * (TAU - delta);
                let s = if after <= before {
                    radius * delta
                } else {
                    -radius * (TAU - delta)
                };
                let l = sign * (radius - rho);
                (s, l)
            }
            Centerline::Polyline(poly) => poly.project(p),
        }
    }

    pub fn transformed(&self, t: &Rigid2) -> Centerline {
        match self {
            Centerline::Straight { start, length } => Centerline::Straight {
                start: t.apply_pose(*start),
                length: *length,
            },
            Centerline::Arc {
                start,
                radius,
                turn,
                length,
            } => Centerline::Arc {
                start: t.apply_pose(*start),
                radius: *radius,
                turn: *turn,
                length: *length,
            },
            Centerline::Polyline(p) => Centerline::Polyline(p.transformed(t)),
        }
    }

    /// Curve traversed in the opposite direction.
    pub fn reversed(&self) -> Centerline {
        match self {
            Centerline::Straight { length, .. } => {
                let end = self.point_at(*length, 0.0);
                Centerline::Straight {
                    start: Pose {
                        position: end.position,
                        heading: wrap_angle(end.heading + std::f64::consts::PI),
                    },
                    length: *length,
                }
            }
            Centerline::Arc {
                radius, turn, length, ..
            } => {
                let end = self.point_at(*length, 0.0);
                Centerline::Arc {
                    start: Pose {
                        position: end.position,
                        heading: wrap_angle(end.heading + std::f64::consts::PI),
                    },
                    radius: *radius,
                    turn: turn.flip(),
                    length: *length,
                }
            }
            Centerline::Polyline(p) => {
                let mut pts = p.points().to_vec();
                pts.reverse();
                Centerline::Polyline(Polyline::new(pts).expect("reversal keeps a valid polyline"))
            }
        }
    }

    /// The parallel curve at lateral offset `l` (positive left).
    pub fn offset(&self, l: f64) -> Centerline {
        match self {
            Centerline::Straight { start, length } => Centerline::Straight {
                start: Pose {
                    position: start.position + start.left() * l,
                    heading: start.heading,
                },
                length: *length,
            },
            Centerline::Arc {
                start,
                radius,
                turn,
                length,
            } => {
                let angle = length / radius;
                let new_radius = radius - turn.sign() * l;
                Centerline::Arc {
                    start: Pose {
                        position: start.position + start.left() * l,
                        heading: start.heading,
                    },
                    radius: new_radius,
                    turn: *turn,
                    length: new_radius * angle,
                }
            }
            Centerline::Polyline(p) => {
                let n = p.points().len();
                let pts = (0..n)
                    .map(|i| {
                        let s = p.cumulative[i];
                        p.point_at(s, l).position
                    })
                    .collect();
                Centerline::Polyline(Polyline::new(pts).expect("offset polyline"))
            }
        }
    }

    /// Points at `stations(max_chord)`. Polyline vertices are returned
    /// exactly as stored.
    pub fn sample_points(&self, max_chord: f64) -> Vec<Vec2> {
        match self {
            Centerline::Polyline(p) => {
                let mut out = vec![p.points[0]];
                for (i, w) in p.cumulative.windows(2).enumerate() {
                    let seg = w[1] - w[0];
                    if seg > max_chord * (1.0 + 1e-6) {
                        let pieces = (seg / max_chord).ceil() as usize;
                        for k in 1..pieces {
                            out.push(p.points[i].lerp(p.points[i + 1], k as f64 / pieces as f64));
                        }
                    }
                    out.push(p.points[i + 1]);
                }
                out
            }
            _ => self.stations(max_chord).into_iter().map(|s| self.point_at(s, 0.0).position).collect(),
        }
    }

    /// Arc-length stations splitting the curve into equal chords no longer
    /// than `max_chord`. Polylines keep their own vertices and only split
    /// segments that exceed the chord.
    pub fn stations(&self, max_chord: f64) -> Vec<f64> {
        match self {
            Centerline::Polyline(p) => {
                let mut out = vec![0.0];
                for w in p.cumulative.windows(2) {
                    let seg = w[1] - w[0];
                    let pieces = if seg > max_chord * (1.0 + 1e-6) {
                        (seg / max_chord).ceil() as usize
                    } else {
                        1
                    };
                    for k in 1..pieces {
                        out.push(w[0] + seg * k as f64 / pieces as f64);
                    }
                    out.push(w[1]);
                }
                out
            }
            _ => {
                let len = self.length();
                let pieces = ((len / max_chord).ceil() as usize).max(1);
                (0..=pieces).map(|k| len * k as f64 / pieces as f64).collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lane {
    pub id: LaneId,
    pub centerline: Centerline,
    pub width: f64,
    pub left_line: LineType,
    pub right_line: LineType,
    pub kind: LaneKind,
    pub successors: Vec<LaneId>,
    pub predecessors: Vec<LaneId>,
    pub left_neighbor: Option<LaneId>,
    pub right_neighbor: Option<LaneId>,
    bounds: Aabb,
}

impl Lane {
    pub fn new(id: LaneId, centerline: Centerline, width: f64) -> Self {
        let mut lane = Self {
            id,
            centerline,
            width,
            left_line: LineType::Broken,
            right_line: LineType::Broken,
            kind: LaneKind::Road,
            successors: Vec::new(),
            predecessors: Vec::new(),
            left_neighbor: None,
            right_neighbor: None,
            bounds: Aabb::EMPTY,
        };
        lane.refresh_bounds();
        lane
    }

    pub fn length(&self) -> f64 {
        self.centerline.length()
    }

    /// Bounding box of the lane surface.
    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub(crate) fn refresh_bounds(&mut self) {
        let half = self.width / 2.0;
        let c = &self.centerline;
        let pts = c
            .stations(2.0)
            .into_iter()
            .flat_map(|s| [c.point_at(s, half).position, c.point_at(s, -half).position]);
        // chords undercut arcs slightly; 0.5 m covers the sagitta at 2 m chords
        self.bounds = Aabb::from_points(pts).inflate(0.5);
    }

    /// World pose at longitudinal `s` and lateral `l` (positive left).
    pub fn point_at(&self, s: f64, l: f64) -> Result<Pose, RoadError> {
        let len = self.length();
        if !(s >= -1e-9 && s <= len + 1e-9) {
            return Err(RoadError::OutOfRange { lane: self.id, s, length: len });
        }
        Ok(self.centerline.point_at(s.clamp(0.0, len), l))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.centerline.heading_at(s.clamp(0.0, self.length()))
    }

    pub fn project(&self, p: Vec2) -> (f64, f64) {
        self.centerline.project(p)
    }

    /// Left and right boundary polylines sampled at `chord` spacing.
    pub fn boundaries(&self, chord: f64) -> [Vec<Vec2>; 2] {
        let half = self.width / 2.0;
        let st = self.centerline.stations(chord);
        let c = &self.centerline;
        [
            st.iter().map(|&s| c.point_at(s, half).position).collect(),
            st.iter().map(|&s| c.point_at(s, -half).position).collect(),
        ]
    }

    pub fn transformed(&self, t: &Rigid2) -> Lane {
        let mut lane = self.clone();
        lane.centerline = self.centerline.transformed(t);
        lane.refresh_bounds();
        lane
    }

    pub(crate) fn remap_ids(&mut self, f: impl Fn(LaneId) -> LaneId) {
        self.id = f(self.id);
        for s in self.successors.iter_mut().chain(self.predecessors.iter_mut()) {
            *s = f(*s);
        }
        self.left_neighbor = self.left_neighbor.map(&f);
        self.right_neighbor = self.right_neighbor.map(&f);
    }
}
