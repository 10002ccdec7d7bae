//! `cxd.toml` settings and `CXD_*_URL` overrides.
//!
//! ```toml
//! [backends]
//! planner_url = "http://localhost:8080"
//! denoiser_url = "http://localhost:8081"
//! retouch_url = "http://localhost:8082"
//! timeout_secs = 60
//!
//! [modulation]
//! lambda_pos = 0.5
//! lambda_neg = 0.5
//! omega = 0.7
//! steps = 8
//! seed = 0
//! height = 64
//! width = 64
//! channels = 4
//!
//! [lexicons]
//! path = "my.lex"
//!
//! [planner]
//! max_simple_concepts = 4
//! truncate_attributes = true
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analysis::ComplexityThresholds;
use crate::composer::{LatentShape, ModulationParams, DEFAULT_SHAPE};
use crate::lexicon::Lexicon;
use crate::planner::PlannerConfig;

pub const PLANNER_URL_VAR: &str = "CXD_PLANNER_URL";
pub const DENOISER_URL_VAR: &str = "CXD_DENOISER_URL";
pub const RETOUCH_URL_VAR: &str = "CXD_RETOUCH_URL";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsSection {
    pub planner_url: Option<String>,
    pub denoiser_url: Option<String>,
    pub retouch_url: Option<String>,
    pub timeout_secs: u64,
    /// Passed as a bearer token to every remote backend.
    pub token: Option<String>,
}

impl Default for BackendsSection {
    fn default() -> Self {
        BackendsSection {
            planner_url: None,
            denoiser_url: None,
            retouch_url: None,
            timeout_secs: 60,
            token: None,
        }
    }
}

impl BackendsSection {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulationSection {
    #[serde(flatten)]
    pub params: ModulationParams,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Default for ModulationSection {
    fn default() -> Self {
        ModulationSection {
            params: ModulationParams::default(),
            height: DEFAULT_SHAPE.height,
            width: DEFAULT_SHAPE.width,
            channels: DEFAULT_SHAPE.channels,
        }
    }
}

impl ModulationSection {
    pub fn shape(&self) -> LatentShape {
        LatentShape::new(self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconsSection {
    /// Lexicon file; the built-in lexicon when absent.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub max_simple_concepts: usize,
    pub truncate_attributes: bool,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let d = PlannerConfig::default();
        PlannerSection {
            max_simple_concepts: d.thresholds.max_simple_concepts,
            truncate_attributes: d.truncate_attributes,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backends: BackendsSection,
    pub modulation: ModulationSection,
    pub lexicons: LexiconsSection,
    pub planner: PlannerSection,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Config, ConfigError> {
        let mut config: Config = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: origin.display().to_string(), message: e.to_string() })?;
        // relative lexicon paths are relative to the config file
        if let (Some(lex), Some(dir)) = (&config.lexicons.path, origin.parent()) {
            if lex.is_relative() {
                config.lexicons.path = Some(dir.join(lex));
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Config::parse(&text, path)
    }

    /// Reads `path` if given, else `./cxd.toml` when present, else defaults;
    /// then applies the environment overrides.
    pub fn discover(path: Option<&Path>) -> Result<Config, ConfigError> {
        let mut config = match path {
            Some(p) => Config::load(p)?,
            None if Path::new("cxd.toml").is_file() => Config::load(Path::new("cxd.toml"))?,
            None => Config::default(),
        };
        config.apply_env(|k| std::env::var(k).ok());
        Ok(config)
    }

    /// Non-empty `CXD_*_URL` values replace the configured URLs.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let b = &mut self.backends;
        for (var, slot) in [
            (PLANNER_URL_VAR, &mut b.planner_url),
            (DENOISER_URL_VAR, &mut b.denoiser_url),
            (RETOUCH_URL_VAR, &mut b.retouch_url),
        ] {
            if let Some(v) = lookup(var).filter(|v| !v.trim().is_empty()) {
                *slot = Some(v);
            }
        }
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            thresholds: ComplexityThresholds { max_simple_concepts: self.planner.max_simple_concepts },
            truncate_attributes: self.planner.truncate_attributes,
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon, crate::error::LexiconError> {
        match &self.lexicons.path {
            Some(p) => Lexicon::from_file(p),
            None => Ok(Lexicon::builtin()),
        }
    }
}
