use std::collections::BTreeSet;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::HASH_CHORD;
use crate::engine::{MapInfo, PreparedMap};
use crate::geom::{Segment, Vec2};
use crate::policies::TrajectoryLog;
use crate::procgen::{build_map, PGConfig};
use crate::roadnet::{Centerline, Destination, Lane, LaneId, LaneKind, LineType, Polyline, RoadNetwork, SpawnPoint};

pub const FORMAT_VERSION: u32 = 1;
/// Largest allowed gap between consecutive centerline waypoints.
pub const MAX_WAYPOINT_SPACING: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ImportError {
    ImportError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Where the scene came from (dataset name, generator, hand-authored).
    pub source: String,
    pub case_id: String,
    /// Set when analytic curves were sampled into polylines on export.
    #[serde(default)]
    pub discretized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaneDoc {
    pub id: u32,
    /// Centerline waypoints `[x, y]` in travel order.
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
    #[serde(default = "broken")]
    pub left_line: LineType,
    #[serde(default = "broken")]
    pub right_line: LineType,
    #[serde(default = "road")]
    pub kind: LaneKind,
    #[serde(default)]
    pub successors: Vec<u32>,
    #[serde(default)]
    pub predecessors: Vec<u32>,
    #[serde(default)]
    pub left_neighbor: Option<u32>,
    #[serde(default)]
    pub right_neighbor: Option<u32>,
}

fn broken() -> LineType {
    LineType::Broken
}

fn road() -> LaneKind {
    LaneKind::Road
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDoc {
    /// Generated on import from a PG config and a map index.
    Pg { config: PGConfig, index: usize },
    Lanes { lanes: Vec<LaneDoc> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoRoute {
    pub start: Destination,
    pub destination: Destination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    pub version: u32,
    #[serde(default)]
    pub metadata: Metadata,
    pub map: MapDoc,
    #[serde(default)]
    pub tracks: Option<TrajectoryLog>,
    #[serde(default)]
    pub ego_route: Option<EgoRoute>,
}

/// Result of importing a document.
#[derive(Clone, Debug)]
pub struct ImportedScenario {
    pub net: RoadNetwork,
    pub tracks: Option<TrajectoryLog>,
    pub ego_route: Option<EgoRoute>,
}

impl ImportedScenario {
    /// Network plus spawn info ready for a map manager.
    pub fn prepare(self) -> Result<PreparedMap, ImportError> {
        let mut info = if self.net.blocks().is_empty() {
            MapInfo::for_lanes(&self.net)
        } else {
            MapInfo::for_pg(&self.net)
        };
        if let Some(r) = self.ego_route {
            let lane = self.net.lane(r.start.lane).map_err(|e| invalid("ego_route.start", e.to_string()))?;
            let pose = lane.point_at(r.start.s, 0.0).map_err(|e| invalid("ego_route.start.s", e.to_string()))?;
            info.ego_starts = vec![SpawnPoint {
                lane: r.start.lane,
                s: r.start.s,
                pose,
            }];
            info.destination = Some(r.destination);
        }
        info.tracks = self.tracks.map(Arc::new);
        Ok(PreparedMap {
            net: Arc::new(self.net),
            info,
        })
    }
}

fn check_polyline(path: &str, pts: &[Vec2]) -> Result<(), ImportError> {
    if pts.len() < 2 {
        return Err(invalid(path, "needs at least two waypoints"));
    }
    for (i, p) in pts.iter().enumerate() {
        if !p.is_finite() {
            return Err(invalid(format!("{path}[{i}]"), "non-finite coordinate"));
        }
    }
    for (i, w) in pts.windows(2).enumerate() {
        let d = w[0].distance(w[1]);
        if !(d > 0.0) {
            return Err(invalid(format!("{path}[{}]", i + 1), "repeated waypoint"));
        }
        if d > MAX_WAYPOINT_SPACING + 1e-9 {
            return Err(invalid(
                format!("{path}[{}]", i + 1),
                format!("waypoint spacing {d:.3} m exceeds {MAX_WAYPOINT_SPACING} m"),
            ));
        }
    }
    // non-adjacent segments must not touch
    let segs: Vec<Segment> = pts.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
    for i in 0..segs.len() {
        for j in i + 2..segs.len() {
            if segs[i].a.distance(segs[j].a) > 2.0 * MAX_WAYPOINT_SPACING + 1e-6 {
                continue;
            }
            if segs[i].intersection(&segs[j]).is_some() {
                return Err(invalid(format!("{path}[{}]", j), format!("self-intersection with segment {i}")));
            }
        }
    }
    Ok(())
}

/// Build the network and logs a document describes.
pub fn import_scenario(doc: &ScenarioDocument) -> Result<ImportedScenario, ImportError> {
    if doc.version != FORMAT_VERSION {
        return Err(invalid("version", format!("unsupported version {}", doc.version)));
    }
    let net = match &doc.map {
        MapDoc::Pg { config, index } => build_map(config, *index).map_err(|e| invalid("map.config", e.to_string()))?,
        MapDoc::Lanes { lanes } => {
            let ids: BTreeSet<u32> = lanes.iter().map(|l| l.id).collect();
            if ids.len() != lanes.len() {
                let mut seen = BTreeSet::new();
                let k = lanes.iter().position(|l| !seen.insert(l.id)).expect("duplicate exists");
                return Err(invalid(format!("map.lanes[{k}].id"), format!("duplicate id {}", lanes[k].id)));
            }
            let mut out = Vec::with_capacity(lanes.len());
            for (k, ld) in lanes.iter().enumerate() {
                let base = format!("map.lanes[{k}]");
                let pts: Vec<Vec2> = ld.centerline.iter().map(|p| Vec2::new(p[0], p[1])).collect();
                check_polyline(&format!("{base}.centerline"), &pts)?;
                if !(ld.width > 0.0 && ld.width.is_finite()) {
                    return Err(invalid(format!("{base}.width"), "width must be positive"));
                }
                let refs = ld
                    .successors
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (format!("successors[{i}]"), *r))
                    .chain(ld.predecessors.iter().enumerate().map(|(i, r)| (format!("predecessors[{i}]"), *r)))
                    .chain(ld.left_neighbor.map(|r| ("left_neighbor".to_string(), r)))
                    .chain(ld.right_neighbor.map(|r| ("right_neighbor".to_string(), r)));
                for (field, r) in refs {
                    if !ids.contains(&r) {
                        return Err(invalid(format!("{base}.{field}"), format!("unknown lane id {r}")));
                    }
                }
                let poly = Polyline::new(pts).map_err(|e| invalid(format!("{base}.centerline"), e.to_string()))?;
                let mut lane = Lane::new(LaneId(ld.id), Centerline::Polyline(poly), ld.width);
                lane.left_line = ld.left_line;
                lane.right_line = ld.right_line;
                lane.kind = ld.kind;
                lane.successors = ld.successors.iter().map(|i| LaneId(*i)).collect();
                lane.predecessors = ld.predecessors.iter().map(|i| LaneId(*i)).collect();
                lane.left_neighbor = ld.left_neighbor.map(LaneId);
                lane.right_neighbor = ld.right_neighbor.map(LaneId);
                out.push(lane);
            }
            RoadNetwork::from_lanes(out).map_err(|e| invalid("map.lanes", e.to_string()))?
        }
    };
    if let Some(log) = &doc.tracks {
        log.validate().map_err(|e| invalid("tracks", e.to_string()))?;
    }
    if let Some(r) = &doc.ego_route {
        for (field, d) in [("start", r.start), ("destination", r.destination)] {
            let lane = net
                .lane(d.lane)
                .map_err(|_| invalid(format!("ego_route.{field}.lane"), format!("unknown lane id {}", d.lane.0)))?;
            if !(d.s >= 0.0 && d.s <= lane.length() + 1e-9) {
                return Err(invalid(format!("ego_route.{field}.s"), format!("{} outside [0, {}]", d.s, lane.length())));
            }
        }
    }
    Ok(ImportedScenario {
        net,
        tracks: doc.tracks.clone(),
        ego_route: doc.ego_route,
    })
}

/// Explicit-lane document for a network. Analytic centerlines are sampled
/// at 1 m chords and flagged in the metadata.
pub fn export_scenario(net: &RoadNetwork, tracks: Option<&TrajectoryLog>, metadata: Metadata) -> ScenarioDocument {
    let mut discretized = false;
    let lanes = net
        .lanes()
        .iter()
        .map(|l| {
            discretized |= l.centerline.is_analytic();
            LaneDoc {
                id: l.id.0,
                centerline: l.centerline.sample_points(HASH_CHORD).iter().map(|p| [p.x, p.y]).collect(),
                width: l.width,
                left_line: l.left_line,
                right_line: l.right_line,
                kind: l.kind,
                successors: l.successors.iter().map(|i| i.0).collect(),
                predecessors: l.predecessors.iter().map(|i| i.0).collect(),
                left_neighbor: l.left_neighbor.map(|i| i.0),
                right_neighbor: l.right_neighbor.map(|i| i.0),
            }
        })
        .collect();
    ScenarioDocument {
        version: FORMAT_VERSION,
        metadata: Metadata { discretized, ..metadata },
        map: MapDoc::Lanes { lanes },
        tracks: tracks.cloned(),
        ego_route: None,
    }
}

impl ScenarioDocument {
    pub fn from_json(text: &str) -> Result<Self, ImportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn load(path: &Path) -> Result<Self, ImportError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ImportError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
