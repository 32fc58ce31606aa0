//! INI generation config.
//!
//! ```ini
//! [generation]
//! seed = 7
//! target_fps = 1.0
//! categories = counting, binary_presence
//! scale_aug = 1, 10
//! extra_vocabulary = piano, bicycle
//! ```
//!
//! Keys may also sit outside any section. Command-line flags are applied on
//! top of the parsed file by the caller.

use std::path::Path;

use ini::Ini;
use svf_core::qa::Convention;
use svf_core::{Category, DepthSource, GenerationConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Read(#[from] ini::Error),
    #[error("unknown config section [{0}]")]
    UnknownSection(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        message: e.to_string(),
    })
}

pub fn apply_key(config: &mut GenerationConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    match key {
        "seed" => config.seed = parse(key, value)?,
        "target_fps" => config.target_fps = parse(key, value)?,
        "max_questions_per_frame_per_category" => config.max_questions_per_frame_per_category = parse(key, value)?,
        "distance_overlap_rejection" => config.distance_overlap_rejection = parse(key, value)?,
        "cot" => config.cot = parse(key, value)?,
        "convention" => config.convention = parse::<Convention>(key, value)?,
        "depth_source_for_cot" => config.depth_source_for_cot = parse::<DepthSource>(key, value)?,
        "categories" => {
            config.categories = list(value)
                .map(|c| parse::<Category>(key, c))
                .collect::<Result<_, _>>()?;
        }
        "extra_vocabulary" => config.extra_vocabulary = list(value).map(String::from).collect(),
        "scale_aug" => {
            let parts: Vec<&str> = list(value).collect();
            config.scale_aug = match parts.as_slice() {
                ["none"] | [] => None,
                [lo, hi] => Some((parse(key, lo)?, parse(key, hi)?)),
                _ => {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        message: "expected `lo, hi` or `none`".into(),
                    })
                }
            };
        }
        other => return Err(ConfigError::UnknownKey(other.into())),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<GenerationConfig, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let mut config = GenerationConfig::default();
    for (section, props) in ini.iter() {
        match section {
            None | Some("generation") => {}
            Some(other) => return Err(ConfigError::UnknownSection(other.into())),
        }
        for (k, v) in props.iter() {
            apply_key(&mut config, k.trim(), v)?;
        }
    }
    config.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<GenerationConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(ini::Error::Io(e)))?;
    parse_config(&text)
}
