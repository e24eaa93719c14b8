use sha2::{Digest, Sha256};

use crate::roadnet::{LaneKind, LineType, RoadNetwork};

/// Chord used to sample lane centerlines for hashing and export.
pub const HASH_CHORD: f64 = 1.0;

fn q(x: f64) -> i64 {
    (x * 1e6).round() as i64
}

fn line_code(t: LineType) -> u8 {
    match t {
        LineType::Broken => 0,
        LineType::Continuous => 1,
        LineType::None => 2,
    }
}

/// SHA-256 over the lane set in id order: centerline samples at 1 m
/// chords and widths quantized to 1e-6 m, boundary types and topology.
/// Analytic lanes hash like their exported polylines.
pub fn map_hash(net: &RoadNetwork) -> String {
    let mut h = Sha256::new();
    h.update(b"drivesim-map-v1");
    h.update((net.lanes().len() as u64).to_le_bytes());
    for lane in net.lanes() {
        h.update(lane.id.0.to_le_bytes());
        h.update(q(lane.width).to_le_bytes());
        h.update([
            line_code(lane.left_line),
            line_code(lane.right_line),
            matches!(lane.kind, LaneKind::Junction) as u8,
        ]);
        let pts = lane.centerline.sample_points(HASH_CHORD);
        h.update((pts.len() as u64).to_le_bytes());
        for p in pts {
            h.update(q(p.x).to_le_bytes());
            h.update(q(p.y).to_le_bytes());
        }
        for list in [&lane.successors, &lane.predecessors] {
            h.update((list.len() as u64).to_le_bytes());
            for id in list {
                h.update(id.0.to_le_bytes());
            }
        }
        for n in [lane.left_neighbor, lane.right_neighbor] {
            h.update(n.map_or(u64::MAX, |id| id.0 as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}
