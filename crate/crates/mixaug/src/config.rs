//! Versioned TOML run configuration shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use mixaug_core::inr::RegistrationConfig;
use mixaug_core::lesion::InjectionConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

fn version() -> u32 {
    CONFIG_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "version")]
    pub version: u32,
    /// Global seed for pool planning and batch sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub registration: RegistrationConfig,
    #[serde(default)]
    pub injection: InjectionConfig,
    #[serde(default)]
    pub pool: PoolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            registration: RegistrationConfig::default(),
            injection: InjectionConfig::default(),
            pool: PoolConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TumorCase {
    pub id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
    /// Brain mask; estimated from the image when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brain: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthyCase {
    pub id: String,
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brain: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolConfig {
    pub k_spatial: usize,
    pub k_semantic: usize,
    pub r_real: f64,
    pub tumor: Vec<TumorCase>,
    pub healthy: Vec<HealthyCase>,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self {
            k_spatial: 20,
            k_semantic: 5,
            r_real: 0.5,
            tumor: Vec::new(),
            healthy: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Loads a config file; relative case paths are taken relative to it.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for c in &mut self.pool.tumor {
            fix(&mut c.image);
            fix(&mut c.mask);
            if let Some(b) = c.brain.as_mut() {
                fix(b);
            }
        }
        for c in &mut self.pool.healthy {
            fix(&mut c.image);
            if let Some(b) = c.brain.as_mut() {
                fix(b);
            }
        }
    }

    /// Range checks of every numeric parameter, before any file is touched.
    pub fn validate(&self) -> Result<()> {
        self.registration.validate()?;
        self.injection.validate()?;
        let p = &self.pool;
        if !(p.r_real > 0.0 && p.r_real <= 1.0) {
            return Err(Error::Config(format!(
                "pool.r_real must lie in (0, 1], got {}",
                p.r_real
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}
