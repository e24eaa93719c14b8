mod common;

use std::collections::BTreeSet;

use common::oracle::straight_curve_config;
use drivesim_core::dynamics::Action;
use drivesim_core::env::{evaluate, Env, EpisodeRecord, MapSpec, Metrics, ScenarioConfig, TerminationReason};
use drivesim_core::procgen::PGConfig;
use drivesim_core::scenario_io::map_hash;

fn traffic_free(map: MapSpec) -> ScenarioConfig {
    ScenarioConfig {
        map,
        traffic: None,
        ..ScenarioConfig::default()
    }
}

#[test]
fn rule_follower_finishes_straight_and_curve_maps() {
    let cfg = traffic_free(MapSpec::Pg {
        config: straight_curve_config(3, 50, 0),
        start_seed: 0,
    });
    let (m, recs) = evaluate(&cfg, 0..50, |env, n| env.expert_action(n).unwrap()).unwrap();
    let failed: Vec<&EpisodeRecord> = recs.iter().filter(|r| r.reason != TerminationReason::Success).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert_eq!(m.success_rate, 1.0);
}

#[test]
fn zero_policy_never_arrives() {
    let cfg = ScenarioConfig {
        horizon: 50,
        ..traffic_free(MapSpec::Pg {
            config: straight_curve_config(2, 5, 0),
            start_seed: 0,
        })
    };
    let (m, _) = evaluate(&cfg, 0..5, |_, _| Action::ZERO).unwrap();
    assert_eq!(m.success_rate, 0.0);
    assert_eq!(m.timeout_rate, 1.0);
    assert_eq!(m.crash_rate + m.rule_violation_rate, 0.0);
}

#[test]
fn zero_action_reward_is_near_zero() {
    let mut env = Env::new(traffic_free(MapSpec::Pg {
        config: PGConfig::block_num(3, 1, 0),
        start_seed: 0,
    }))
    .unwrap();
    env.reset(0).unwrap();
    let name = env.agent_names()[0].clone();
    for _ in 0..30 {
        let res = env.step(&[(name.clone(), Action::ZERO)].into()).unwrap();
        assert!(res.outcomes[&name].reward.abs() < 1e-9);
    }
}

#[test]
fn metrics_follow_their_definition() {
    let rec = |reason| EpisodeRecord {
        seed: 0,
        agent: "agent0".into(),
        reason,
        reward: 1.0,
        cost: 0.0,
        steps: 1,
    };
    let mut recs: Vec<EpisodeRecord> = (0..7).map(|_| rec(TerminationReason::Success)).collect();
    recs.extend((0..3).map(|_| rec(TerminationReason::CrashVehicle)));
    let m = Metrics::from_records(&recs);
    assert_eq!(m.episodes, 10);
    assert!((m.success_rate - 0.7).abs() < 1e-12);
    assert!((m.crash_rate - 0.3).abs() < 1e-12);
    let timeouts: Vec<EpisodeRecord> = (0..4).map(|_| rec(TerminationReason::Horizon)).collect();
    let m = Metrics::from_records(&timeouts);
    assert_eq!((m.success_rate, m.crash_rate, m.rule_violation_rate, m.timeout_rate), (0.0, 0.0, 0.0, 1.0));
}

#[test]
fn train_and_test_seed_ranges_share_no_map() {
    let train = PGConfig::block_num(3, 100, 0);
    let test = PGConfig::block_num(3, 50, 100);
    let hashes = |cfg: &PGConfig| -> BTreeSet<String> {
        drivesim_core::procgen::generate_maps(cfg).unwrap().iter().map(map_hash).collect()
    };
    let a = hashes(&train);
    let b = hashes(&test);
    assert_eq!(a.len(), 100);
    assert_eq!(b.len(), 50);
    assert!(a.is_disjoint(&b));
}

#[test]
fn cost_grows_with_obstacle_density() {
    let run = |density: f64| {
        let cfg = ScenarioConfig {
            safe_mode: true,
            obstacle_density: density,
            horizon: 250,
            ..traffic_free(MapSpec::Pg {
                config: PGConfig::block_num(3, 50, 0),
                start_seed: 0,
            })
        };
        // the follower steers but never brakes for obstacles
        let (_, recs) = evaluate(&cfg, 0..50, |env, n| {
            let a = env.expert_action(n).unwrap();
            Action::new(a.steering, 0.4)
        })
        .unwrap();
        recs.iter().map(|r| r.cost).collect::<Vec<f64>>()
    };
    let clear = run(0.0);
    let dense = run(0.5);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&dense) >= mean(&clear), "{} < {}", mean(&dense), mean(&clear));
    assert!(mean(&dense) > 0.0);
}
