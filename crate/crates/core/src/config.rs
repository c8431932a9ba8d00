//! Service configuration file.
//!
//! A single TOML document holds the model registry (one `[[models]]` table per
//! model, including pricing), gateway tuning, optional provider endpoint
//! overrides and the monthly budget. Provider credentials never live here;
//! they come from `PROVIDER_<NAME>_API_KEY` environment variables.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::gateway::{GatewayError, ModelSpec, Provider, Registry};
use crate::money::Money;

const SEED_CONFIG: &str = include_str!("../assets/registry.toml");

pub const DEFAULT_MAX_UPLOAD_BYTES: usize = 20 * 1024 * 1024;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub gateway: GatewaySettings,
    #[serde(default)]
    pub providers: BTreeMap<Provider, ProviderEndpoint>,
    #[serde(default)]
    pub monthly_budget: Option<Money>,
    #[serde(default = "default_warn_ratio")]
    pub budget_warn_ratio: f64,
    #[serde(default = "default_max_upload")]
    pub max_upload_bytes: usize,
    /// Mock reply script; when set, every provider is served by the mock.
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatewaySettings {
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub request_timeout_secs: u64,
    /// Tokens held back for the reply when fitting history into the window.
    #[serde(default = "default_reserved_output")]
    pub reserved_output_tokens: u32,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            max_retries: default_max_retries(),
            backoff_ms: default_backoff_ms(),
            request_timeout_secs: default_timeout(),
            reserved_output_tokens: default_reserved_output(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderEndpoint {
    pub base_url: String,
}

fn default_warn_ratio() -> f64 {
    0.8
}
fn default_max_upload() -> usize {
    DEFAULT_MAX_UPLOAD_BYTES
}
fn default_max_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_timeout() -> u64 {
    120
}
fn default_reserved_output() -> u32 {
    1024
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let cfg: ServiceConfig =
            toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        if !(0.0..=1.0).contains(&cfg.budget_warn_ratio) {
            return Err(GatewayError::Config(format!(
                "budget_warn_ratio {} outside [0, 1]",
                cfg.budget_warn_ratio
            )));
        }
        if let Some(limit) = cfg.monthly_budget {
            if limit <= Money::ZERO {
                return Err(GatewayError::Config(
                    "monthly_budget must be positive".into(),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(script) = &cfg.mock_script {
            if script.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.mock_script = Some(dir.join(script));
                }
            }
        }
        Ok(cfg)
    }

    /// The shipped configuration with the seven seed models.
    pub fn seed() -> Self {
        Self::parse(SEED_CONFIG).expect("shipped registry.toml is valid")
    }

    pub fn registry(&self) -> Result<Registry, GatewayError> {
        Registry::new(self.models.clone())
    }
}
