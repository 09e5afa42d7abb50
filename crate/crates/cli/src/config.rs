//! Structured mirror of the `simulate` flags, and privacy-level input files.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use hdp_mean::{DistributionSpec, MechanismKind, PrivacyInput, PrivacyVector, TwoGroupProfile};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};
use crate::output::{format_float, OutputFormat, SCHEMA_VERSION};

/// A privacy level; written as a JSON number, or the string `"inf"` for a
/// public user since JSON has no infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level(pub f64);

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&format_float(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct LevelVisitor;

        impl Visitor<'_> for LevelVisitor {
            type Value = Level;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Level, E> {
                Ok(Level(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Level, E> {
                Ok(Level(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Level, E> {
                Ok(Level(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Level, E> {
                parse_level(v).map(Level).map_err(E::custom)
            }
        }

        d.deserialize_any(LevelVisitor)
    }
}

fn parse_level(s: &str) -> Result<f64, String> {
    s.trim()
        .to_ascii_lowercase()
        .parse::<f64>()
        .map_err(|e| format!("bad privacy level {s:?}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PrivacyConfig {
    TwoGroup { eps1: Level, eps2: Level, n: u64, f: f64 },
    Levels { levels: Vec<Level> },
}

impl PrivacyConfig {
    pub fn from_input(input: &PrivacyInput) -> Self {
        match input {
            PrivacyInput::TwoGroup(p) => PrivacyConfig::TwoGroup {
                eps1: Level(p.eps1),
                eps2: Level(p.eps2),
                n: p.n,
                f: p.f,
            },
            PrivacyInput::Vector(v) => PrivacyConfig::Levels {
                levels: v.levels().iter().map(|e| Level(*e)).collect(),
            },
        }
    }

    pub fn to_input(&self) -> CliResult<PrivacyInput> {
        Ok(match self {
            PrivacyConfig::TwoGroup { eps1, eps2, n, f } => {
                PrivacyInput::TwoGroup(TwoGroupProfile::new(eps1.0, eps2.0, *n, *f)?)
            }
            PrivacyConfig::Levels { levels } => {
                PrivacyInput::Vector(PrivacyVector::new(levels.iter().map(|l| l.0).collect())?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub mechanisms: Vec<MechanismKind>,
    pub privacy: PrivacyConfig,
    pub distribution: DistributionSpec,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub clamp: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(CliError::usage(format!(
                "{}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
                path.display(),
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads one privacy level per line. Blank lines and lines starting with
/// `#` are skipped; `inf` marks a public user.
pub fn read_levels(path: &Path) -> CliResult<PrivacyVector> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    parse_levels(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?
}

fn parse_levels(text: &str) -> Result<CliResult<PrivacyVector>, String> {
    let mut levels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        levels.push(parse_level(line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    if levels.is_empty() {
        return Err("no privacy levels found".to_string());
    }
    Ok(PrivacyVector::new(levels).map_err(CliError::from))
}
