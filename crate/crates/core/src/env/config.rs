use serde::{Deserialize, Serialize};

use super::layouts::Layout;
use super::reward::RewardConfig;
use super::EnvError;
use crate::dynamics::VehicleParams;
use crate::engine::TrafficConfig;
use crate::procgen::PGConfig;
use crate::scenario_io::ScenarioDocument;
use crate::sensing::LidarConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    /// `config.map_count` generated maps; env seed `k` drives map
    /// `start_seed + (k - start_seed) mod map_count`.
    Pg {
        config: PGConfig,
        #[serde(default)]
        start_seed: u64,
    },
    Layout { name: Layout },
    /// Imported scenes, chosen by `seed mod len`.
    Scenarios { documents: Vec<ScenarioDocument> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub map: MapSpec,
    pub traffic: Option<TrafficConfig>,
    /// Move vehicles along the map's logged tracks.
    pub replay_traffic: bool,
    /// Obstacles per 100 m of road lane.
    pub obstacle_density: f64,
    pub horizon: u64,
    pub reward: RewardConfig,
    /// Crashes cost instead of terminating.
    pub safe_mode: bool,
    pub agents: usize,
    /// Replace terminated agents immediately (multi-agent scenes).
    pub respawn: bool,
    pub lidar: LidarConfig,
    pub vehicle: VehicleParams,
    /// Register the toll booth manager and append its two flags to the
    /// observation.
    pub tollgate: bool,
    /// Lateral slack beyond the lane edge before the vehicle is off road.
    pub out_of_road_margin: f64,
    /// Remaining route distance that counts as arrival.
    pub arrival_margin: f64,
    /// Shortest route handed to a multi-agent spawn.
    pub min_route: f64,
    /// Desired speed of the built-in rule-based ego driver.
    pub expert_speed: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            map: MapSpec::Pg {
                config: PGConfig::block_num(3, 100, 0),
                start_seed: 0,
            },
            traffic: Some(TrafficConfig {
                recycle_radius: Some(crate::engine::RECYCLE_RADIUS),
                ..TrafficConfig::default()
            }),
            replay_traffic: false,
            obstacle_density: 0.0,
            horizon: 1500,
            reward: RewardConfig::default(),
            safe_mode: false,
            agents: 1,
            respawn: false,
            lidar: LidarConfig::default(),
            vehicle: VehicleParams::default(),
            tollgate: false,
            out_of_road_margin: 0.5,
            arrival_margin: 5.0,
            min_route: 40.0,
            expert_speed: 12.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::Config(m));
        if self.horizon < 1 {
            return bad("horizon must be >= 1".into());
        }
        if self.agents < 1 {
            return bad("at least one agent is required".into());
        }
        if !(self.obstacle_density >= 0.0 && self.obstacle_density.is_finite()) {
            return bad(format!("obstacle density must be >= 0, got {}", self.obstacle_density));
        }
        if self.replay_traffic && self.traffic.is_some() {
            return bad("replay traffic and rule-based traffic are exclusive".into());
        }
        if !(self.reward.v_max > 0.0) {
            return bad("v_max must be positive".into());
        }
        if self.lidar.num_rays == 0 || !(self.lidar.max_range > 0.0) {
            return bad("lidar needs rays and a positive range".into());
        }
        if let Some(t) = &self.traffic {
            t.validate()?;
        }
        if let MapSpec::Pg { config, .. } = &self.map {
            config.validate().map_err(|e| EnvError::Config(e.to_string()))?;
        }
        if let MapSpec::Scenarios { documents } = &self.map {
            if documents.is_empty() {
                return bad("scenario set is empty".into());
            }
        }
        Ok(())
    }

    /// Length of one observation vector.
    pub fn observation_dim(&self) -> usize {
        self.lidar.observation_dim() + if self.tollgate { 2 } else { 0 }
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let c: Self = serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}
