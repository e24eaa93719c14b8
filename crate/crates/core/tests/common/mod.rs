#![allow(dead_code)]

use drivesim_core::geom::Vec2;
use drivesim_core::roadnet::{Block, Lane, RoadNetwork, Socket};

pub mod oracle;

pub const TOL: f64 = 1e-3;

fn edges(lane: &Lane) -> Vec<(Vec2, Vec2)> {
    let mut out = Vec::new();
    for side in lane.boundaries(2.0) {
        for w in side.windows(2) {
            out.push((w[0], w[1]));
        }
    }
    out
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn point_seg(p: Vec2, a: Vec2, b: Vec2) -> (f64, Vec2) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let f = Vec2::new(a.x + t * dx, a.y + t * dy);
    (((p.x - f.x).powi(2) + (p.y - f.y).powi(2)).sqrt(), f)
}

/// Distance between two segments and a contact point, by exhaustive cases.
pub fn seg_distance(a: (Vec2, Vec2), b: (Vec2, Vec2)) -> (f64, Vec2) {
    let (p1, p2, p3, p4) = (a.0, a.1, b.0, b.1);
    let d1 = orient(p3, p4, p1);
    let d2 = orient(p3, p4, p2);
    let d3 = orient(p1, p2, p3);
    let d4 = orient(p1, p2, p4);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        let t = d1 / (d1 - d2);
        return (0.0, Vec2::new(p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y)));
    }
    let cands = [
        (point_seg(p1, p3, p4), p1),
        (point_seg(p2, p3, p4), p2),
        (point_seg(p3, p1, p2), p3),
        (point_seg(p4, p1, p2), p4),
    ];
    let ((d, f), p) = cands.into_iter().min_by(|x, y| x.0 .0.total_cmp(&y.0 .0)).unwrap();
    (d, Vec2::new((f.x + p.x) / 2.0, (f.y + p.y) / 2.0))
}

fn in_joint(p: Vec2, joint: &Socket, radius: f64) -> bool {
    let (a, b) = joint.cross_section();
    point_seg(p, a, b).0 <= radius
}

fn extent(e: &[(Vec2, Vec2)]) -> [f64; 4] {
    let mut r = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for (a, b) in e {
        for p in [a, b] {
            r[0] = r[0].min(p.x);
            r[1] = r[1].min(p.y);
            r[2] = r[2].max(p.x);
            r[3] = r[3].max(p.y);
        }
    }
    r
}

fn pair_hits(la: &[Lane], lb: &[Lane], joints: &[&Socket], radius: f64, out: &mut Vec<(u32, u32, Vec2)>) {
    let eb: Vec<_> = lb.iter().map(|b| {
        let e = edges(b);
        (extent(&e), e)
    }).collect();
    for a in la {
        let ea = edges(a);
        let xa = extent(&ea);
        for (b, (xb, edges_b)) in lb.iter().zip(&eb) {
            // whole-lane box rejection only; every remaining pair is checked
            if xa[0] > xb[2] + TOL || xb[0] > xa[2] + TOL || xa[1] > xb[3] + TOL || xb[1] > xa[3] + TOL {
                continue;
            }
            for sa in &ea {
                for &sb in edges_b {
                    let (d, at) = seg_distance(*sa, sb);
                    if d <= TOL && !joints.iter().any(|j| in_joint(at, j, radius)) {
                        out.push((a.id.0, b.id.0, at));
                    }
                }
            }
        }
    }
}

/// Boundary contacts between lanes of different blocks away from every
/// docking joint of the network.
pub fn brute_force_crossings(net: &RoadNetwork) -> Vec<(u32, u32, Vec2)> {
    let radius = net.road().unwrap().lane_width;
    let joints: Vec<&Socket> = net.blocks().iter().filter_map(|b| b.joint.as_ref()).collect();
    let per_block: Vec<Vec<Lane>> = net
        .blocks()
        .iter()
        .map(|b| b.lane_ids().map(|id| net.lane(id).unwrap().clone()).collect())
        .collect();
    let mut out = Vec::new();
    for i in 0..per_block.len() {
        for j in i + 1..per_block.len() {
            pair_hits(&per_block[i], &per_block[j], &joints, radius, &mut out);
        }
    }
    out
}

/// Contacts between a docked candidate and the network, ignoring the
/// candidate's own joint.
pub fn candidate_crossings(net: &RoadNetwork, candidate: &Block) -> Vec<(u32, u32, Vec2)> {
    let mut out = Vec::new();
    let joints: Vec<&Socket> = candidate.entry_socket().into_iter().collect();
    pair_hits(&candidate.lanes, net.lanes(), &joints, candidate.road.lane_width, &mut out);
    out
}
