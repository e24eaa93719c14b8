use super::config::{MapSpec, ScenarioConfig};
use super::layouts::Layout;
use super::{Env, EnvError};
use crate::engine::TrafficConfig;
use crate::procgen::PGConfig;
use crate::sensing::LidarConfig;

/// Names accepted by [`make_named_env`].
pub const SCENARIO_NAMES: [&str; 9] = [
    "Roundabout",
    "Intersection",
    "Tollgate",
    "Bottleneck",
    "ParkingLot",
    "PGMap",
    "SingleAgentPG",
    "SafeExploration",
    "RealReplay",
];

fn marl(map: MapSpec, agents: usize) -> ScenarioConfig {
    ScenarioConfig {
        map,
        traffic: None,
        agents,
        respawn: true,
        horizon: 1000,
        lidar: LidarConfig::marl(),
        ..ScenarioConfig::default()
    }
}

/// Preset config for a named scenario.
pub fn named_config(name: &str) -> Result<ScenarioConfig, EnvError> {
    let layout = |l: Layout| MapSpec::Layout { name: l };
    Ok(match name {
        "Roundabout" => marl(layout(Layout::Roundabout), 40),
        "Intersection" => marl(layout(Layout::Intersection), 30),
        "Tollgate" => ScenarioConfig {
            tollgate: true,
            ..marl(layout(Layout::Tollgate), 40)
        },
        "Bottleneck" => marl(layout(Layout::Bottleneck), 20),
        "ParkingLot" => {
            let mut c = marl(layout(Layout::ParkingLot), 10);
            c.vehicle.allow_reverse = true;
            c
        }
        "PGMap" => marl(
            MapSpec::Pg {
                config: PGConfig::block_num(3, 1, 0),
                start_seed: 0,
            },
            40,
        ),
        "SingleAgentPG" => ScenarioConfig::default(),
        "SafeExploration" => ScenarioConfig {
            safe_mode: true,
            obstacle_density: 0.5,
            traffic: Some(TrafficConfig {
                density: 0.1,
                recycle_radius: Some(crate::engine::RECYCLE_RADIUS),
                ..TrafficConfig::default()
            }),
            ..ScenarioConfig::default()
        },
        "RealReplay" => ScenarioConfig {
            map: layout(Layout::ReplayHighway),
            traffic: None,
            replay_traffic: true,
            ..ScenarioConfig::default()
        },
        other => {
            return Err(EnvError::Config(format!(
                "unknown scenario {other:?}; expected one of {}",
                SCENARIO_NAMES.join(", ")
            )))
        }
    })
}

/// Environment for a named scenario.
pub fn make_named_env(name: &str) -> Result<Env, EnvError> {
    Env::new(named_config(name)?)
}
