use serde::{Deserialize, Serialize};

/// Reward constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Weight of the longitudinal displacement term.
    pub c1: f64,
    /// Weight of the speed term.
    pub c2: f64,
    pub success_reward: f64,
    /// Terminal reward for crashes and rule violations.
    pub failure_penalty: f64,
    /// Speed normalizer in m/s.
    pub v_max: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            c1: 1.0,
            c2: 0.1,
            success_reward: 10.0,
            failure_penalty: -5.0,
            v_max: 80.0 / 3.6,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    #[default]
    None,
    Success,
    CrashVehicle,
    CrashObject,
    OutOfRoad,
    Horizon,
}

impl TerminationReason {
    pub fn is_terminal(self) -> bool {
        self != TerminationReason::None
    }

    pub fn is_crash(self) -> bool {
        matches!(self, TerminationReason::CrashVehicle | TerminationReason::CrashObject)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::None => "none",
            TerminationReason::Success => "success",
            TerminationReason::CrashVehicle => "crash_vehicle",
            TerminationReason::CrashObject => "crash_object",
            TerminationReason::OutOfRoad => "out_of_road",
            TerminationReason::Horizon => "horizon",
        }
    }
}

/// Per-step reward from the route progress before and after the step, the
/// current speed (m/s) and the termination reason of this step.
pub fn compute_reward(prev: f64, cur: f64, speed: f64, reason: TerminationReason, c: &RewardConfig) -> f64 {
    match reason {
        TerminationReason::None => c.c1 * (cur - prev) + c.c2 * (speed / c.v_max),
        TerminationReason::Success => c.success_reward,
        TerminationReason::CrashVehicle | TerminationReason::CrashObject | TerminationReason::OutOfRoad => c.failure_penalty,
        TerminationReason::Horizon => 0.0,
    }
}

/// Cost-bearing contacts of one agent during one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactEvents {
    pub vehicles: u32,
    pub objects: u32,
    /// Whether the body touched a road edge.
    pub sidewalk: bool,
}

/// One unit of cost per contacted body plus one for touching the road edge.
pub fn compute_cost(events: &ContactEvents) -> f64 {
    f64::from(events.vehicles + events.objects + u32::from(events.sidewalk))
}

/// Per-agent step facts termination is decided from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentEvents {
    pub contacts: ContactEvents,
    pub out_of_road: bool,
    pub arrived: bool,
}

/// Reason for this step. Crashes are non-terminal in safe mode; the
/// horizon applies only when nothing else ended the episode.
pub fn termination_check(ev: &AgentEvents, safe_mode: bool, step: u64, horizon: u64) -> TerminationReason {
    if !safe_mode && ev.contacts.vehicles > 0 {
        TerminationReason::CrashVehicle
    } else if !safe_mode && ev.contacts.objects > 0 {
        TerminationReason::CrashObject
    } else if ev.out_of_road {
        TerminationReason::OutOfRoad
    } else if ev.arrived {
        TerminationReason::Success
    } else if step >= horizon {
        TerminationReason::Horizon
    } else {
        TerminationReason::None
    }
}
