//! Brute-force references written against raw coordinates only.

use drivesim_core::geom::{Obb, Pose, Segment, Vec2};
use drivesim_core::procgen::PGConfig;
use drivesim_core::rng::SimRng;
use rand::Rng;

pub fn corners(b: &Obb) -> [Vec2; 4] {
    let (c, s) = (b.heading.cos(), b.heading.sin());
    let f = Vec2::new(c * b.half_length, s * b.half_length);
    let l = Vec2::new(-s * b.half_width, c * b.half_width);
    [
        Vec2::new(b.center.x + f.x + l.x, b.center.y + f.y + l.y),
        Vec2::new(b.center.x - f.x + l.x, b.center.y - f.y + l.y),
        Vec2::new(b.center.x - f.x - l.x, b.center.y - f.y - l.y),
        Vec2::new(b.center.x + f.x - l.x, b.center.y + f.y - l.y),
    ]
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Distance along a unit ray to a segment, by Cramer's rule.
pub fn ray_hit(o: Vec2, d: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = Vec2::new(b.x - a.x, b.y - a.y);
    let den = cross(d, e);
    if den.abs() < 1e-15 {
        return None;
    }
    let ao = Vec2::new(a.x - o.x, a.y - o.y);
    let t = cross(ao, e) / den;
    let u = cross(ao, d) / den;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Normalized lidar returns by testing every ray against every edge.
pub fn lidar(origin: Pose, n: usize, range: f64, bodies: &[Obb], walls: &[Segment]) -> Vec<f64> {
    let mut edges: Vec<(Vec2, Vec2)> = Vec::new();
    for b in bodies {
        let c = corners(b);
        for i in 0..4 {
            edges.push((c[i], c[(i + 1) % 4]));
        }
    }
    edges.extend(walls.iter().map(|w| (w.a, w.b)));
    (0..n)
        .map(|i| {
            let ang = origin.heading + std::f64::consts::TAU * i as f64 / n as f64;
            let d = Vec2::new(ang.cos(), ang.sin());
            let t = edges
                .iter()
                .filter_map(|(a, b)| ray_hit(origin.position, d, *a, *b))
                .fold(range, f64::min);
            t.min(range) / range
        })
        .collect()
}

fn inside(p: Vec2, poly: &[Vec2; 4]) -> bool {
    (0..4).all(|i| cross(Vec2::new(poly[(i + 1) % 4].x - poly[i].x, poly[(i + 1) % 4].y - poly[i].y), Vec2::new(p.x - poly[i].x, p.y - poly[i].y)) >= 0.0)
}

fn seg_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| cross(Vec2::new(q.x - p.x, q.y - p.y), Vec2::new(r.x - p.x, r.y - p.y));
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    d1 * d2 <= 0.0 && d3 * d4 <= 0.0
}

/// Two rectangles overlap when an edge pair crosses or one holds a corner
/// of the other.
pub fn rects_overlap(a: &Obb, b: &Obb) -> bool {
    let (ca, cb) = (corners(a), corners(b));
    for i in 0..4 {
        for j in 0..4 {
            if seg_cross(ca[i], ca[(i + 1) % 4], cb[j], cb[(j + 1) % 4]) {
                return true;
            }
        }
    }
    inside(ca[0], &cb) || inside(cb[0], &ca)
}

/// Random scene of boxes and walls around the origin, none containing it.
pub fn lidar_scene(rng: &mut SimRng) -> (Pose, Vec<Obb>, Vec<Segment>) {
    let origin = Pose::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-3.2..3.2));
    let mut bodies = Vec::new();
    while bodies.len() < 12 {
        let c = Vec2::new(
            origin.position.x + rng.random_range(-60.0..60.0),
            origin.position.y + rng.random_range(-60.0..60.0),
        );
        let b = Obb::new(c, rng.random_range(-3.2..3.2), rng.random_range(0.5..6.0), rng.random_range(0.5..3.0));
        if c.distance(origin.position) > b.bounding_radius() + 0.1 {
            bodies.push(b);
        }
    }
    let walls = (0..4)
        .map(|_| {
            let a = Vec2::new(rng.random_range(-70.0..70.0), rng.random_range(-70.0..70.0));
            let b = Vec2::new(a.x + rng.random_range(-30.0..30.0), a.y + rng.random_range(-30.0..30.0));
            Segment::new(a, b)
        })
        .collect();
    (origin, bodies, walls)
}

/// Maps composed only of straights and curves.
pub fn straight_curve_config(blocks: usize, count: usize, seed: u64) -> PGConfig {
    use drivesim_core::roadnet::BlockType;
    PGConfig {
        block_types: vec![BlockType::Straight, BlockType::Curve],
        ..PGConfig::block_num(blocks, count, seed)
    }
}
