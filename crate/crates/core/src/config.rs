//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "model": { "name": "octant", "l": 0.5147186257614291 },
//!   "settings": { "a": 0, "b": "pi/2", "c": "pi/4", "d": "-pi/4" },
//!   "delta_t": 1.5,
//!   "trials_per_pair": 1000000,
//!   "seed": { "seed": 42, "stream": 0 }
//! }
//! ```
//!
//! Angles are radians, either as numbers or as text multiples of `pi`
//! (`"pi/4"`, `"-3pi/4"`, `"3*pi/4"`, `"π/2"`). Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::ExperimentConfig;
use crate::lhv::ModelSpec;
use crate::rng::RunSeed;
use crate::types::{ChshSettings, CoincidenceWindow, Setting};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Parse a radian angle given as a number or a multiple of pi.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let t: String = text
        .trim()
        .replace('π', "pi")
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    let bad = || format!("cannot parse angle `{text}`");
    let value = if let Some(idx) = t.find("pi") {
        let (head, tail) = (&t[..idx], &t[idx + 2..]);
        let head = head.strip_suffix('*').unwrap_or(head);
        let coef = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().map_err(|_| bad())?,
        };
        let den = match tail {
            "" => 1.0,
            d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
        };
        if den == 0.0 {
            return Err(bad());
        }
        coef * PI / den
    } else {
        t.parse::<f64>().map_err(|_| bad())?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AngleField {
    Radians(f64),
    Text(String),
}

impl AngleField {
    fn resolve(&self, key: &str) -> Result<Setting, ConfigError> {
        let x = match self {
            AngleField::Radians(x) => *x,
            AngleField::Text(t) => parse_angle(t).map_err(|e| invalid(key, e))?,
        };
        Setting::new(x).map_err(|e| invalid(key, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelField {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsField {
    pub a: AngleField,
    pub b: AngleField,
    pub c: AngleField,
    pub d: AngleField,
}

/// The on-disk form of an [`ExperimentConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: ModelField,
    pub settings: SettingsField,
    pub delta_t: f64,
    pub trials_per_pair: u64,
    pub seed: RunSeed,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let model = match (self.model.name.as_str(), self.model.l) {
            ("octant", Some(l)) => {
                if !(0.0..=1.0).contains(&l) {
                    return Err(invalid("model.l", format!("l out of [0,1]: {l}")));
                }
                ModelSpec::Octant { l }
            }
            ("octant", None) => return Err(invalid("model.l", "required for the octant model")),
            ("classic" | "qm", Some(_)) => return Err(invalid("model.l", "only the octant model takes l")),
            ("classic", None) => ModelSpec::Classic,
            ("qm", None) => ModelSpec::Qm,
            (other, _) => {
                return Err(invalid(
                    "model.name",
                    format!("unknown model `{other}` (expected octant, classic or qm)"),
                ))
            }
        };
        let settings = ChshSettings {
            a: self.settings.a.resolve("settings.a")?,
            b: self.settings.b.resolve("settings.b")?,
            c: self.settings.c.resolve("settings.c")?,
            d: self.settings.d.resolve("settings.d")?,
        };
        let window = CoincidenceWindow::new(self.delta_t).map_err(|e| invalid("delta_t", e.to_string()))?;
        if self.trials_per_pair == 0 {
            return Err(invalid("trials_per_pair", "must be >= 1"));
        }
        Ok(ExperimentConfig {
            model,
            settings,
            window,
            trials_per_pair: self.trials_per_pair,
            seed: self.seed,
        })
    }
}

impl From<&ExperimentConfig> for ConfigFile {
    fn from(c: &ExperimentConfig) -> Self {
        let angle = |s: Setting| AngleField::Radians(s.angle());
        ConfigFile {
            schema_version: SCHEMA_VERSION,
            model: ModelField {
                name: c.model.name().to_string(),
                l: match c.model {
                    ModelSpec::Octant { l } => Some(l),
                    _ => None,
                },
            },
            settings: SettingsField {
                a: angle(c.settings.a),
                b: angle(c.settings.b),
                c: angle(c.settings.c),
                d: angle(c.settings.d),
            },
            delta_t: c.window.delta_t(),
            trials_per_pair: c.trials_per_pair,
            seed: c.seed,
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    serde_json::from_str::<ConfigFile>(text)?.resolve()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

/// Canonical JSON echo of a configuration (angles as canonical radians).
pub fn to_json(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(&ConfigFile::from(config)).expect("config serializes")
}
