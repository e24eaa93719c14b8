//! Built-in controllers. Each is a plain decision function; the engine
//! decides which vehicle runs which policy.

mod follower;
mod idm;
mod lane_change;
mod replay;
mod tollgate;

pub use follower::{pure_pursuit, throttle_for, LaneFollower, LOOKAHEAD_MIN};
pub use idm::{idm_acceleration, IdmOutput, IdmParams};
pub use lane_change::{lane_change_decision, LaneChange, LaneOption, MOBIL_THRESHOLD};
pub use replay::{replay_step, LogPose, ReplayError, Track, TrajectoryLog, LOG_TICK};
pub use tollgate::{GateDecision, GateTimer, HALT_SPEED, HALT_TIME};
