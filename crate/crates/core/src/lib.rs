pub mod dynamics;
pub mod engine;
pub mod env;
pub mod geom;
pub mod policies;
pub mod procgen;
pub mod rng;
pub mod roadnet;
pub mod scenario_io;
pub mod sensing;
pub mod teleop;
