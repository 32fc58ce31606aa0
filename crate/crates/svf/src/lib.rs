//! File formats, judge transports, the depth tool service and the `svf`
//! command line on top of `svf-core`.

pub mod commands;
pub mod config;
pub mod judges;
pub mod jsonl;
pub mod manifest;
pub mod scene_io;
pub mod service;

pub use scene_io::{load_scene, load_scenes, save_scene};
