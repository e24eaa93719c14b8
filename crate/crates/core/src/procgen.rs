//! Block Incremental Generation: grow a road network block by block,
//! backtracking when no candidate fits.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{fork, SimRng};
use crate::roadnet::{crossover_test, dock_socket, Block, BlockType, RoadError, RoadNetwork, RoadSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcgenError {
    #[error("invalid map config: {0}")]
    Config(String),
    #[error("generation exhausted after {attempts} attempts with {built} of {wanted} maps built")]
    Exhausted { attempts: usize, built: usize, wanted: usize },
    #[error(transparent)]
    Road(#[from] RoadError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapConfigType {
    BlockNum,
    BlockSequence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PGConfig {
    /// Candidate blocks tried per level before backtracking.
    pub max_tries: usize,
    /// Blocks beyond the FirstBlock.
    pub block_count: usize,
    pub map_count: usize,
    #[serde(rename = "type")]
    pub kind: MapConfigType,
    pub sequence: Option<Vec<BlockType>>,
    /// Types drawn from in `block_num` mode.
    pub block_types: Vec<BlockType>,
    pub seed: u64,
    pub road: RoadSpec,
}

impl Default for PGConfig {
    fn default() -> Self {
        Self {
            max_tries: 40,
            block_count: 3,
            map_count: 1,
            kind: MapConfigType::BlockNum,
            sequence: None,
            block_types: BlockType::RANDOM.to_vec(),
            seed: 0,
            road: RoadSpec::default(),
        }
    }
}

impl PGConfig {
    pub fn block_num(n: usize, map_count: usize, seed: u64) -> Self {
        Self {
            block_count: n,
            map_count,
            seed,
            ..Self::default()
        }
    }

    pub fn block_sequence(sequence: Vec<BlockType>, map_count: usize, seed: u64) -> Self {
        Self {
            block_count: sequence.len(),
            map_count,
            seed,
            kind: MapConfigType::BlockSequence,
            sequence: Some(sequence),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProcgenError> {
        let bad = |m: &str| Err(ProcgenError::Config(m.to_string()));
        if self.max_tries == 0 {
            return bad("max_tries must be at least 1");
        }
        if self.block_count == 0 {
            return bad("block_count must be at least 1");
        }
        if self.map_count == 0 {
            return bad("map_count must be at least 1");
        }
        if self.road.lanes_per_direction == 0 || !(self.road.lane_width > 0.0) {
            return bad("road needs at least one lane of positive width");
        }
        match (self.kind, &self.sequence) {
            (MapConfigType::BlockNum, Some(_)) => bad("sequence given for block_num map"),
            (MapConfigType::BlockNum, None) => {
                if self.block_types.is_empty() || self.block_types.contains(&BlockType::FirstBlock) {
                    return bad("block_types must be non-empty and exclude FirstBlock");
                }
                Ok(())
            }
            (MapConfigType::BlockSequence, None) => bad("block_sequence map without a sequence"),
            (MapConfigType::BlockSequence, Some(seq)) => {
                if seq.len() != self.block_count {
                    return Err(ProcgenError::Config(format!(
                        "sequence has {} blocks but block_count is {}",
                        seq.len(),
                        self.block_count
                    )));
                }
                if seq.contains(&BlockType::FirstBlock) {
                    return bad("FirstBlock cannot appear in a sequence");
                }
                Ok(())
            }
        }
    }

    fn forced_type(&self, level: usize) -> Option<BlockType> {
        self.sequence.as_ref().map(|s| s[level])
    }
}

/// Map config in the declarative form used by scenario documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "config", rename_all = "snake_case")]
pub enum MapConfig {
    BlockNum(usize),
    BlockSequence(Vec<String>),
}

/// Draw a block type uniformly (or take `forced`) and parameters uniformly
/// from its parameter space. The block is built in its local frame.
pub fn get_new_block(rng: &mut SimRng, forced: Option<BlockType>, road: &RoadSpec) -> Block {
    get_new_block_from(rng, forced, &BlockType::RANDOM, road)
}

fn get_new_block_from(rng: &mut SimRng, forced: Option<BlockType>, pool: &[BlockType], road: &RoadSpec) -> Block {
    let t = forced.unwrap_or_else(|| pool[rng.random_range(0..pool.len() as u32) as usize]);
    let params: Vec<f64> = t
        .param_space()
        .iter()
        .map(|p| {
            if p.discrete {
                rng.random_range(p.lo as u32..=p.hi as u32) as f64
            } else {
                p.lo + (p.hi - p.lo) * rng.random::<f64>()
            }
        })
        .collect();
    Block::build(t, &params, road).expect("parameters drawn inside the parameter space")
}

/// Grow `net` until it holds `n` blocks beyond its root, trying at most
/// `max_tries` candidates per level. `next_block` supplies candidates for a
/// given level. On failure the network is restored to its input state.
pub fn big_with<F>(max_tries: usize, net: &mut RoadNetwork, n: usize, rng: &mut SimRng, mut next_block: F) -> bool
where
    F: FnMut(&mut SimRng, usize) -> Block,
{
    let base = net.appended_blocks();
    if base >= n {
        return true;
    }
    // tries[k] counts candidates spent at level base + k
    let mut tries = vec![0usize];
    loop {
        let level = net.appended_blocks();
        if level == n {
            return true;
        }
        let spent = tries.last_mut().unwrap();
        if *spent < max_tries {
            *spent += 1;
            let candidate = next_block(rng, level);
            if net.open_sockets().is_empty() {
                continue;
            }
            let target = rng.random_range(0..net.open_sockets().len() as u32) as usize;
            let Some(own) = candidate.entry_index() else { continue };
            let Ok(docked) = dock_socket(&candidate, own, &net.open_sockets()[target]) else {
                continue;
            };
            if crossover_test(net, &docked) {
                continue;
            }
            net.append(docked, target).expect("docked block appends");
            tries.push(0);
        } else {
            tries.pop();
            if tries.is_empty() {
                return false;
            }
            net.pop_last().expect("backtracking removes an appended block");
        }
    }
}

/// BIG with uniformly random block types.
pub fn big(max_tries: usize, net: &mut RoadNetwork, n: usize, rng: &mut SimRng) -> bool {
    let road = *net.road().expect("procedural network has a road spec");
    big_with(max_tries, net, n, rng, |r, _| get_new_block(r, None, &road))
}

fn attempt(cfg: &PGConfig, index: u64, attempt: u64) -> Option<RoadNetwork> {
    let mut rng = fork(cfg.seed, &[index, attempt]);
    let mut net = RoadNetwork::first_block(cfg.road);
    let ok = big_with(cfg.max_tries, &mut net, cfg.block_count, &mut rng, |r, level| {
        get_new_block_from(r, cfg.forced_type(level), &cfg.block_types, &cfg.road)
    });
    if !ok {
        return None;
    }
    let dest = net.default_destination().expect("generated map has an exit");
    net.set_destination(dest).expect("default destination is on the network");
    Some(net)
}

/// Map number `index` of the training set described by `cfg`. Each index
/// has its own random stream, so maps can be rebuilt individually.
pub fn build_map(cfg: &PGConfig, index: usize) -> Result<RoadNetwork, ProcgenError> {
    cfg.validate()?;
    let cap = 1000;
    for a in 0..cap {
        if let Some(net) = attempt(cfg, index as u64, a) {
            return Ok(net);
        }
    }
    Err(ProcgenError::Exhausted {
        attempts: cap as usize,
        built: 0,
        wanted: 1,
    })
}

/// The `map_count` maps of `cfg`. Failed BIG runs are retried with fresh
/// randomness, up to 1000 attempts per requested map in total.
pub fn generate_maps(cfg: &PGConfig) -> Result<Vec<RoadNetwork>, ProcgenError> {
    cfg.validate()?;
    let cap = 1000 * cfg.map_count;
    let mut maps = Vec::with_capacity(cfg.map_count);
    let mut attempts = 0;
    for index in 0..cfg.map_count {
        let mut a = 0u64;
        loop {
            if attempts >= cap {
                return Err(ProcgenError::Exhausted {
                    attempts,
                    built: maps.len(),
                    wanted: cfg.map_count,
                });
            }
            attempts += 1;
            if let Some(net) = attempt(cfg, index as u64, a) {
                maps.push(net);
                break;
            }
            a += 1;
        }
    }
    Ok(maps)
}

/// Build one map from a declarative map config.
pub fn build_from_config(config: &MapConfig, seed: u64, max_tries: usize, road: RoadSpec) -> Result<RoadNetwork, ProcgenError> {
    let cfg = match config {
        MapConfig::BlockNum(n) => PGConfig {
            max_tries,
            road,
            ..PGConfig::block_num(*n, 1, seed)
        },
        MapConfig::BlockSequence(names) => {
            let seq = names
                .iter()
                .map(|s| s.parse::<BlockType>().map_err(|e| ProcgenError::Config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            PGConfig {
                max_tries,
                road,
                ..PGConfig::block_sequence(seq, 1, seed)
            }
        }
    };
    build_map(&cfg, 0)
}
