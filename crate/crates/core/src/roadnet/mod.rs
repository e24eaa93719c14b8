//! Road geometry and topology: lanes, parameterized blocks, the assembled
//! network with Frenet queries, docking, crossover tests and routing.

mod block;
mod lane;
mod network;
mod route;

use thiserror::Error;

pub use block::{lane_slots, Block, BlockType, ParamSpec, RoadSpec, Socket, SocketDirection, SpawnPoint, SLOT_SPACING};
pub use lane::{Centerline, Lane, LaneId, LaneKind, LineType, Polyline, Turn};
pub use network::{
    crossover_test, dock_socket, BlockRecord, Destination, Frenet, RoadNetwork, BOUNDARY_CHORD, CROSSOVER_TOLERANCE,
};
pub use route::{route_search, Route, CHECKPOINT_SPACING};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoadError {
    #[error("s = {s} outside [0, {length}] on {lane}")]
    OutOfRange { lane: LaneId, s: f64, length: f64 },
    #[error("point ({x:.3}, {y:.3}) is not on the road network")]
    OffNetwork { x: f64, y: f64 },
    #[error("docking failed: {0}")]
    Docking(String),
    #[error("{0}")]
    Pop(String),
    #[error("no route from {from} to {to}")]
    Unreachable { from: LaneId, to: LaneId },
    #[error("unknown lane {0}")]
    UnknownLane(LaneId),
    #[error("unknown block type {0:?}")]
    UnknownBlockType(String),
    #[error("invalid block parameters: {0}")]
    Params(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid network: {0}")]
    Topology(String),
}
