use std::collections::HashSet;

use super::types::{ModelSpec, Tier};
use super::GatewayError;

/// Smallest context window a registry entry may declare.
pub const MIN_CONTEXT_WINDOW: u32 = 1024;

/// Read-only set of routable models, in config order.
#[derive(Debug, Clone)]
pub struct Registry {
    models: Vec<ModelSpec>,
}

impl Registry {
    pub fn new(models: Vec<ModelSpec>) -> Result<Self, GatewayError> {
        if models.is_empty() {
            return Err(GatewayError::Config("model registry is empty".into()));
        }
        let mut seen = HashSet::new();
        for m in &models {
            if m.model_id.trim().is_empty() {
                return Err(GatewayError::Config("model with empty model_id".into()));
            }
            if !seen.insert(m.model_id.as_str()) {
                return Err(GatewayError::Config(format!(
                    "duplicate model_id {:?}",
                    m.model_id
                )));
            }
            if m.context_window < MIN_CONTEXT_WINDOW {
                return Err(GatewayError::Config(format!(
                    "model {:?}: context_window {} is below {MIN_CONTEXT_WINDOW}",
                    m.model_id, m.context_window
                )));
            }
            for (what, price) in [
                ("input_price", m.input_price),
                ("output_price", m.output_price),
            ] {
                if price.raw() < 0 {
                    return Err(GatewayError::Config(format!(
                        "model {:?}: negative {what}",
                        m.model_id
                    )));
                }
                // at most six decimals keeps per-token costs exact
                if price.raw() % 1_000_000 != 0 {
                    return Err(GatewayError::Config(format!(
                        "model {:?}: {what} has more than six decimals",
                        m.model_id
                    )));
                }
            }
        }
        Ok(Registry { models })
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.model_id == model_id)
    }

    pub fn models(&self) -> &[ModelSpec] {
        &self.models
    }

    pub fn list(&self, tier_filter: Option<Tier>) -> Vec<&ModelSpec> {
        self.models
            .iter()
            .filter(|m| tier_filter.is_none_or(|t| m.tier == t))
            .collect()
    }

    /// Other models of the same tier, in config order.
    pub fn alternates(&self, model_id: &str) -> Vec<String> {
        let Some(spec) = self.get(model_id) else {
            return Vec::new();
        };
        self.models
            .iter()
            .filter(|m| m.tier == spec.tier && m.model_id != model_id)
            .map(|m| m.model_id.clone())
            .collect()
    }
}
