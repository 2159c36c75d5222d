//! Run configuration: relation presets, search box and calibration defaults.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engle_granger::PredictorCoeffs;
use crate::error::{Error, Result};
use crate::integral::{Bound, SearchBox};
use crate::series::Window;

pub const BUNDLED_RELATIONS: &str = include_str!("../../data/relations.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationConfig {
    pub target: String,
    #[serde(default)]
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    #[serde(default)]
    pub t0: u32,
    #[serde(default)]
    pub t1: u32,
    pub start: i32,
    pub end: i32,
    /// Window for the Engle-Granger step when it differs from the main one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eg_start: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eg_end: Option<i32>,
    /// Extra cumulative fit with A0 held at this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_a0: Option<f64>,
    /// Search box for this relation's cumulative fit, replacing the global one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
}

impl RelationConfig {
    pub fn coeffs(&self) -> PredictorCoeffs {
        PredictorCoeffs { a0: self.a0, a1: self.a1, a2: self.a2, t0: self.t0, t1: self.t1 }
    }

    pub fn uses_ue(&self) -> bool {
        self.a0 != 0.0
    }

    pub fn window(&self) -> Window {
        Window::new(self.start, self.end)
    }

    pub fn eg_window(&self) -> Window {
        Window::new(self.eg_start.unwrap_or(self.start), self.eg_end.unwrap_or(self.end))
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.start > self.end {
            return Err(Error::Config(format!("relation `{name}`: start {} after end {}", self.start, self.end)));
        }
        if ![self.a0, self.a1, self.a2].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("relation `{name}`: non-finite coefficient")));
        }
        if let Some(s) = &self.search {
            s.validate(&format!("relation `{name}` search"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub a0: [f64; 2],
    pub a1: [f64; 2],
    pub a2: [f64; 2],
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { a0: [-3.0, 0.0], a1: [0.0, 30.0], a2: [-0.2, 0.2] }
    }
}

impl SearchConfig {
    fn validate(&self, what: &str) -> Result<()> {
        for (n, [lo, hi]) in [("a0", self.a0), ("a1", self.a1), ("a2", self.a2)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{what}: {n} bounds [{lo}, {hi}] are not an interval")));
            }
        }
        Ok(())
    }

    pub fn search_box(&self) -> SearchBox {
        SearchBox {
            a0: Bound::Range(self.a0[0], self.a0[1]),
            a1: Bound::Range(self.a1[0], self.a1[1]),
            a2: Bound::Range(self.a2[0], self.a2[1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub reps: usize,
    pub length: usize,
    pub tests: Vec<String>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { reps: 500, length: 200, tests: vec!["adf".into(), "dfgls".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub relations: BTreeMap<String, RelationConfig>,
}

pub const DEFAULT_SEED: u64 = 20_070_501;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Config {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_RELATIONS).expect("bundled relation presets parse")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (name, r) in &cfg.relations {
            r.validate(name)?;
        }
        cfg.search.validate("search")?;
        Ok(cfg)
    }

    /// The relation's own search box, else the global one.
    pub fn search_for(&self, r: &RelationConfig) -> SearchBox {
        r.search.as_ref().unwrap_or(&self.search).search_box()
    }

    pub fn relation(&self, name: &str) -> Result<&RelationConfig> {
        self.relations.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown relation `{name}`; available: {}",
                self.relations.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    /// SHA-256 of the canonical JSON rendering of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
