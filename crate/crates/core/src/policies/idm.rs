use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub time_headway: f64,
    pub min_gap: f64,
    pub accel: f64,
    pub decel: f64,
    pub exponent: f64,
    pub emergency_decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            desired_speed: 10.0,
            time_headway: 1.5,
            min_gap: 2.0,
            accel: 2.0,
            decel: 2.0,
            exponent: 4.0,
            emergency_decel: 7.0,
        }
    }
}

impl IdmParams {
    /// Copy with the desired speed scaled uniformly within +-`spread`.
    pub fn randomized(&self, rng: &mut SimRng, spread: f64) -> Self {
        let f = 1.0 + spread * (2.0 * rng.random::<f64>() - 1.0);
        Self {
            desired_speed: self.desired_speed * f,
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdmOutput {
    pub accel: f64,
    /// The leader gap was not positive.
    pub overlap: bool,
}

/// Intelligent-driver acceleration for speed `v` behind an optional leader
/// `(gap, leader speed)`; gap is bumper to bumper.
pub fn idm_acceleration(v: f64, leader: Option<(f64, f64)>, p: &IdmParams) -> IdmOutput {
    let free = 1.0 - (v.max(0.0) / p.desired_speed).powf(p.exponent);
    let a = match leader {
        None => p.accel * free,
        Some((gap, _)) if gap <= 0.0 => {
            return IdmOutput {
                accel: -p.emergency_decel,
                overlap: true,
            }
        }
        Some((gap, vl)) => {
            let s_star = p.min_gap + (v * p.time_headway + v * (v - vl) / (2.0 * (p.accel * p.decel).sqrt())).max(0.0);
            p.accel * (free - (s_star / gap).powi(2))
        }
    };
    IdmOutput {
        accel: a.clamp(-p.emergency_decel, p.accel),
        overlap: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::fork;

    #[test]
    fn free_road_equilibrium() {
        let p = IdmParams::default();
        assert!(idm_acceleration(p.desired_speed, None, &p).accel.abs() <= 1e-9);
        assert_eq!(idm_acceleration(0.0, None, &p).accel, p.accel);
    }

    #[test]
    fn standstill_at_min_gap() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(0.0, Some((p.min_gap, 0.0)), &p).accel, 0.0);
    }

    #[test]
    fn non_positive_gap_brakes_hard() {
        let p = IdmParams::default();
        let o = idm_acceleration(5.0, Some((-0.1, 5.0)), &p);
        assert!(o.overlap);
        assert_eq!(o.accel, -7.0);
    }

    #[test]
    fn monotone_in_closing_speed() {
        let p = IdmParams::default();
        let mut last = f64::INFINITY;
        for k in 0..50 {
            let vl = 20.0 - k as f64 * 0.5;
            let a = idm_acceleration(10.0, Some((15.0, vl)), &p).accel;
            assert!(a <= last);
            last = a;
        }
    }

    #[test]
    fn randomized_speed_stays_within_spread() {
        let p = IdmParams::default();
        let mut rng = fork(1, &[]);
        for _ in 0..100 {
            let q = p.randomized(&mut rng, 0.2);
            assert!((8.0..=12.0).contains(&q.desired_speed));
        }
    }
}
