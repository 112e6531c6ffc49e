//! Service and pipeline configuration, read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid listen address {0:?}")]
    InvalidListen(String),
    #[error("port must be within 1..=65535, got {0}")]
    InvalidPort(u16),
    #[error("generation.{field} must be at least 1")]
    InvalidGeneration { field: &'static str },
    #[error("generation.depth must be 1 or 2, got {0}")]
    InvalidDepth(u8),
    #[error("no scripted fixture configured; --offline needs backend.fixture")]
    NoOfflineFixture,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSection {
    pub listen: String,
    pub data_dir: PathBuf,
    pub campaign: String,
    /// Shared token required on every API request when set.
    #[serde(default)]
    pub bearer_token: Option<String>,
    /// Token allowed to trigger generation runs. Generation is disabled without it.
    #[serde(default)]
    pub operator_token: Option<String>,
    #[serde(default)]
    pub cors_origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackendSection {
    Scripted {
        fixture: PathBuf,
    },
    HttpChat {
        endpoint: String,
        model: String,
        temperature: f64,
        /// Name of the environment variable holding the API key.
        api_key_env: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
        /// Used instead of the live endpoint under `--offline`.
        #[serde(default)]
        fixture: Option<PathBuf>,
    },
}

fn default_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub candidates: usize,
    pub parallelism: usize,
    #[serde(default = "default_depth")]
    pub depth: u8,
}

fn default_depth() -> u8 {
    1
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Knowledge graph file per game id.
    #[serde(default)]
    pub kg: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub battle_template: Option<PathBuf>,
    #[serde(default)]
    pub npc_template: Option<PathBuf>,
    #[serde(default)]
    pub personas: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub service: ServiceSection,
    pub backend: BackendSection,
    pub generation: GenerationSection,
    #[serde(default)]
    pub paths: PathsSection,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ServiceConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
            .map_err(|e| match e {
                ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.display().to_string(), message },
                other => other,
            })
    }

    /// Parses and validates, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: ServiceConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: "<inline>".into(), message: e.to_string() })?;
        resolve(base, &mut config.service.data_dir);
        match &mut config.backend {
            BackendSection::Scripted { fixture } => resolve(base, fixture),
            BackendSection::HttpChat { fixture, .. } => {
                if let Some(f) = fixture {
                    resolve(base, f);
                }
            }
        }
        for p in config.paths.kg.values_mut() {
            resolve(base, p);
        }
        for p in [&mut config.paths.battle_template, &mut config.paths.npc_template, &mut config.paths.personas]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.listen_addr()?;
        if self.generation.candidates == 0 {
            return Err(ConfigError::InvalidGeneration { field: "candidates" });
        }
        if self.generation.parallelism == 0 {
            return Err(ConfigError::InvalidGeneration { field: "parallelism" });
        }
        if !(1..=2).contains(&self.generation.depth) {
            return Err(ConfigError::InvalidDepth(self.generation.depth));
        }
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ConfigError> {
        let addr: SocketAddr =
            self.service.listen.parse().map_err(|_| ConfigError::InvalidListen(self.service.listen.clone()))?;
        if addr.port() == 0 {
            return Err(ConfigError::InvalidPort(0));
        }
        Ok(addr)
    }

    /// The backend to use, with `offline` forcing fixture replay.
    pub fn effective_backend(&self, offline: bool) -> Result<BackendSection, ConfigError> {
        match (&self.backend, offline) {
            (BackendSection::HttpChat { fixture: Some(f), .. }, true) => {
                Ok(BackendSection::Scripted { fixture: f.clone() })
            }
            (BackendSection::HttpChat { fixture: None, .. }, true) => Err(ConfigError::NoOfflineFixture),
            (b, _) => Ok(b.clone()),
        }
    }

    pub fn campaign_path(&self) -> PathBuf {
        campaign_path(&self.service.data_dir, &self.service.campaign)
    }
}

/// Where a campaign log lives inside a data directory.
pub fn campaign_path(data_dir: &Path, campaign: &str) -> PathBuf {
    data_dir.join("campaigns").join(format!("{campaign}.jsonl"))
}
