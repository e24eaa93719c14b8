use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::wrap_angle;

/// Native tick of every trajectory log.
pub const LOG_TICK: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReplayError {
    #[error("tracks[{0}]: empty track")]
    EmptyTrack(usize),
    #[error("tracks[{0}]: duplicate id {1:?}")]
    DuplicateId(usize, String),
    #[error("tracks[{0}].poses[{1}]: non-finite value")]
    NonFinite(usize, usize),
    #[error("tick must be {LOG_TICK} s, got {0}")]
    Tick(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

/// One vehicle's poses at consecutive ticks starting at `start_tick`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: String,
    pub start_tick: u32,
    pub poses: Vec<LogPose>,
}

impl Track {
    pub fn end_tick(&self) -> u32 {
        self.start_tick + self.poses.len() as u32 - 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub tick: f64,
    pub tracks: Vec<Track>,
}

impl Default for TrajectoryLog {
    fn default() -> Self {
        Self {
            tick: LOG_TICK,
            tracks: Vec::new(),
        }
    }
}

impl TrajectoryLog {
    pub fn validate(&self) -> Result<(), ReplayError> {
        if self.tick != LOG_TICK {
            return Err(ReplayError::Tick(self.tick));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, t) in self.tracks.iter().enumerate() {
            if t.poses.is_empty() {
                return Err(ReplayError::EmptyTrack(i));
            }
            if !seen.insert(t.id.as_str()) {
                return Err(ReplayError::DuplicateId(i, t.id.clone()));
            }
            for (k, p) in t.poses.iter().enumerate() {
                if ![p.x, p.y, p.heading, p.speed].iter().all(|v| v.is_finite()) {
                    return Err(ReplayError::NonFinite(i, k));
                }
            }
        }
        Ok(())
    }

    /// Last tick covered by any track.
    pub fn end_tick(&self) -> u32 {
        self.tracks.iter().map(Track::end_tick).max().unwrap_or(0)
    }
}

fn blend(a: &LogPose, b: &LogPose, f: f64) -> LogPose {
    LogPose {
        x: a.x + (b.x - a.x) * f,
        y: a.y + (b.y - a.y) * f,
        heading: wrap_angle(a.heading + wrap_angle(b.heading - a.heading) * f),
        speed: a.speed + (b.speed - a.speed) * f,
    }
}

/// Poses of every track alive at time `t`. Native ticks return the logged
/// pose unchanged; times between ticks blend linearly.
pub fn replay_step(log: &TrajectoryLog, t: f64) -> Vec<(&str, LogPose)> {
    let k = t / log.tick;
    let kr = k.round();
    let native = (k - kr).abs() < 1e-6;
    let mut out = Vec::new();
    for tr in &log.tracks {
        let (start, end) = (tr.start_tick as f64, tr.end_tick() as f64);
        if native {
            if kr >= start && kr <= end {
                out.push((tr.id.as_str(), tr.poses[(kr - start) as usize]));
            }
        } else if k > start && k < end {
            let lo = k.floor();
            let i = (lo - start) as usize;
            out.push((tr.id.as_str(), blend(&tr.poses[i], &tr.poses[i + 1], k - lo)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(x: f64) -> LogPose {
        LogPose {
            x,
            y: 0.0,
            heading: 0.0,
            speed: 1.0,
        }
    }

    fn log() -> TrajectoryLog {
        TrajectoryLog {
            tick: LOG_TICK,
            tracks: vec![
                Track {
                    id: "a".into(),
                    start_tick: 0,
                    poses: vec![pose(0.0), pose(0.1), pose(0.30000000000000004)],
                },
                Track {
                    id: "b".into(),
                    start_tick: 2,
                    poses: vec![pose(5.0), pose(6.0)],
                },
            ],
        }
    }

    #[test]
    fn native_ticks_are_bitwise() {
        let l = log();
        let at = replay_step(&l, 0.2);
        assert_eq!(at.len(), 2);
        assert_eq!(at[0].1.x.to_bits(), 0.30000000000000004f64.to_bits());
        assert_eq!(at[1].1, pose(5.0));
    }

    #[test]
    fn between_ticks_blend() {
        let l = log();
        let at = replay_step(&l, 0.25);
        assert_eq!(at.len(), 1);
        assert!((at[0].1.x - 5.5).abs() < 1e-12);
        assert_eq!(at[0].0, "b");
    }

    #[test]
    fn despawn_after_last_tick() {
        let l = log();
        assert!(replay_step(&l, 0.4).is_empty());
        assert_eq!(l.end_tick(), 3);
    }

    #[test]
    fn validation() {
        let mut l = log();
        l.tracks[1].id = "a".into();
        assert!(matches!(l.validate(), Err(ReplayError::DuplicateId(1, _))));
        let mut l = log();
        l.tracks[0].poses[1].x = f64::NAN;
        assert_eq!(l.validate(), Err(ReplayError::NonFinite(0, 1)));
    }
}
