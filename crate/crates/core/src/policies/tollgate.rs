use serde::{Deserialize, Serialize};

/// Speed below which a vehicle counts as halted.
pub const HALT_SPEED: f64 = 0.1;
/// Continuous halt needed before the gate opens.
pub const HALT_TIME: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateDecision {
    Hold,
    Release,
}

/// Per-vehicle gate state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateTimer {
    pub halted_for: f64,
    pub inside: bool,
    pub released: bool,
    /// Left the gate before release.
    pub failed: bool,
}

impl GateTimer {
    /// Advance by `dt` with the vehicle's gate occupancy and speed.
    pub fn update(&mut self, in_gate: bool, speed: f64, dt: f64) -> GateDecision {
        if !in_gate {
            if self.inside && !self.released {
                self.failed = true;
            }
            self.inside = false;
            self.halted_for = 0.0;
            return if self.released { GateDecision::Release } else { GateDecision::Hold };
        }
        self.inside = true;
        if !self.released {
            if speed.abs() < HALT_SPEED {
                self.halted_for += dt;
                // tolerance for accumulated tick rounding
                if self.halted_for >= HALT_TIME - 1e-9 {
                    self.released = true;
                }
            } else {
                self.halted_for = 0.0;
            }
        }
        if self.released {
            GateDecision::Release
        } else {
            GateDecision::Hold
        }
    }

    /// Whether the vehicle is inside and still held.
    pub fn blocked(&self) -> bool {
        self.inside && !self.released
    }
}
