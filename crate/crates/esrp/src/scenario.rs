//! Scenario files: a `RunConfig` in TOML or JSON plus an optional output
//! directory, with command-line style overrides.

use std::fs;
use std::path::{Path, PathBuf};

use esrp_core::engine::{ConfigError, RunConfig};
use esrp_core::security::SecurityToggles;
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: unsupported scenario extension (use .toml or .json)")]
    Extension { path: PathBuf },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ConfigError },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("bad value `{value}` for `{param}`: {message}")]
    BadValue { param: String, value: String, message: String },
}

/// A loaded scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub path: PathBuf,
    pub config: RunConfig,
    /// `out_dir` from the file, if any.
    pub out_dir: Option<PathBuf>,
}

const OUT_KEY: &str = "out_dir";

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_owned(),
            source,
        })?;
        let parse_err = |message: String| ScenarioError::Parse {
            path: path.to_owned(),
            message,
        };
        let value: Value = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => {
                let table: toml::Table = toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
                serde_json::to_value(table).map_err(|e| parse_err(e.to_string()))?
            }
            Some("json") => serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?,
            _ => return Err(ScenarioError::Extension { path: path.to_owned() }),
        };
        Self::from_value(path, value)
    }

    fn from_value(path: &Path, mut value: Value) -> Result<Self, ScenarioError> {
        let parse_err = |message: String| ScenarioError::Parse {
            path: path.to_owned(),
            message,
        };
        let obj = value
            .as_object_mut()
            .ok_or_else(|| parse_err("top level must be a table".into()))?;
        let out_dir = match obj.remove(OUT_KEY) {
            None => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(parse_err(format!("`{OUT_KEY}` must be a string"))),
        };
        let config: RunConfig = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        config.validate().map_err(|source| ScenarioError::Invalid {
            path: path.to_owned(),
            source,
        })?;
        Ok(Self {
            path: path.to_owned(),
            config,
            out_dir,
        })
    }
}

/// Sets one parameter by name and re-validates.
///
/// `security` takes `on`/`off` and switches all four mechanisms; `intruders`
/// is the random attacker count. Anything else is a dotted path into the
/// config (`clustering.k`, `energy.e_elec`, `attacks.mix.drop_prob`) whose
/// value is read as JSON, falling back to a plain string.
pub fn set_param(cfg: &RunConfig, param: &str, value: &str) -> Result<RunConfig, ScenarioError> {
    let bad = |message: String| ScenarioError::BadValue {
        param: param.to_owned(),
        value: value.to_owned(),
        message,
    };
    let mut next = cfg.clone();
    match param {
        "security" => {
            next.security = match value {
                "on" | "true" => SecurityToggles::all(true),
                "off" | "false" => SecurityToggles::all(false),
                _ => return Err(bad("expected on or off".into())),
            };
        }
        "intruders" => {
            next.attacks.count = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?;
        }
        _ => {
            let mut tree = serde_json::to_value(cfg).expect("config serializes");
            let slot = lookup(&mut tree, param).ok_or_else(|| ScenarioError::UnknownParameter(param.to_owned()))?;
            *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_owned()));
            next = serde_json::from_value(tree).map_err(|e| bad(e.to_string()))?;
        }
    }
    next.validate().map_err(|e| bad(e.to_string()))?;
    Ok(next)
}

fn lookup<'a>(tree: &'a mut Value, dotted: &str) -> Option<&'a mut Value> {
    dotted.split('.').try_fold(tree, |node, key| match node {
        Value::Object(map) => field(map, key),
        _ => None,
    })
}

fn field<'a>(map: &'a mut Map<String, Value>, key: &str) -> Option<&'a mut Value> {
    map.get_mut(key)
}
