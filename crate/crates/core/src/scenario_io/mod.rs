//! Neutral scenario documents, demonstration records and map hashing.

mod demo;
mod document;
mod hash;

pub use demo::{record_demo, replay_demo, DemoError, DemoHeader, DemoOutcome, DemoRecord, DemoStep, ReplayReport, DEMO_VERSION};
pub use document::{
    export_scenario, import_scenario, EgoRoute, ImportError, ImportedScenario, LaneDoc, MapDoc, Metadata, ScenarioDocument,
    FORMAT_VERSION, MAX_WAYPOINT_SPACING,
};
pub use hash::{map_hash, HASH_CHORD};
