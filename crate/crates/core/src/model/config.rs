use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Declarative description of a model, as read from a TOML document.
///
/// ```toml
/// [model]
/// name = "example61"
/// n = 3
/// interval = [0.0, 1.0]
/// y = [2.0, 0.5, 0.5, 2.0]
///
/// [scaling]
/// s1 = "0.5 + sin(2*pi*x)/4"
/// s2 = "0.5 + sin(2*pi*x)/4"
/// s3 = "0.5 - sin(2*pi*x)/4"
///
/// [offsets]
/// q1 = "cos(2*pi*x/3)"
/// q2 = "cos(2*pi*(x + 1)/3)"
/// q3 = "cos(2*pi*(x + 2)/3)"
/// ```
///
/// `[offsets]` lists `q1`…`qN`, or gives `weierstrass = φ` to mean
/// `q_i = φ ∘ L_i`. An optional `[tables]` section declares
/// piecewise-linear functions as lists of `[x, y]` vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub scaling: BTreeMap<String, String>,
    #[serde(default)]
    pub offsets: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    /// Explicit knots `x_0 … x_N`, as an alternative to `interval`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    pub y: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse model file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot write model file: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ModelConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn name(&self) -> &str {
        self.model.name.as_deref().unwrap_or("unnamed")
    }
}
