//! Uniform chat-completion interface over several LLM providers.
//!
//! Provider APIs are stateless: every request carries the whole conversation.
//! The gateway validates the request shape, checks the model's context window,
//! routes to the adapter registered for the model's provider, retries
//! transport failures a bounded number of times and normalizes usage.

mod http;
pub mod mock;
mod registry;
mod tokens;
mod types;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use thiserror::Error;
use tokio::sync::mpsc::UnboundedSender;

pub use http::{AnthropicAdapter, CohereAdapter, OpenAiCompatibleAdapter};
pub use mock::{MockAdapter, MockReply, MockScript};
pub use registry::{Registry, MIN_CONTEXT_WINDOW};
pub use tokens::{estimate_messages, estimate_tokens};
pub use types::{ChatRequest, ChatResponse, Message, ModelSpec, Provider, Role, Tier};

use crate::config::{GatewaySettings, ServiceConfig};

/// Receives reply text incrementally.
pub type ChunkSink = UnboundedSender<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterReply {
    pub content: String,
    /// `None` when the provider reported no usage.
    pub usage: Option<ProviderUsage>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AdapterError {
    /// Connection, timeout or server-side failure; worth retrying.
    #[error("transport failure: {0}")]
    Transport(String),
    /// The provider refused the request (4xx class); never retried.
    #[error("rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("{0}")]
    Config(String),
}

/// One provider's chat-completions contract.
#[async_trait]
pub trait ChatAdapter: Send + Sync {
    fn provider(&self) -> Provider;

    async fn send(
        &self,
        model: &ModelSpec,
        request: &ChatRequest,
    ) -> Result<AdapterReply, AdapterError>;

    /// Streams reply text into `sink`. Chunks are only emitted for an attempt
    /// that succeeds. The default sends the whole reply as one chunk.
    async fn send_streaming(
        &self,
        model: &ModelSpec,
        request: &ChatRequest,
        sink: &ChunkSink,
    ) -> Result<AdapterReply, AdapterError> {
        let reply = self.send(model, request).await?;
        let _ = sink.send(reply.content.clone());
        Ok(reply)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("unknown model {0:?}")]
    NotFound(String),
    #[error("request needs ~{estimated} tokens but {model_id} has a context window of {limit}")]
    ContextOverflow {
        model_id: String,
        limit: u64,
        estimated: u64,
    },
    #[error("{provider} failed for {model_id} after {attempts} attempt(s): {message}")]
    Upstream {
        provider: Provider,
        model_id: String,
        attempts: u32,
        message: String,
        /// Same-tier models the user can switch to.
        alternates: Vec<String>,
    },
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_backoff: Duration,
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            base_backoff: Duration::ZERO,
        }
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 2,
            base_backoff: Duration::from_millis(250),
        }
    }
}

impl From<&GatewaySettings> for RetryPolicy {
    fn from(s: &GatewaySettings) -> Self {
        RetryPolicy {
            max_retries: s.max_retries,
            base_backoff: Duration::from_millis(s.backoff_ms),
        }
    }
}

pub struct Gateway {
    registry: Arc<Registry>,
    adapters: HashMap<Provider, Arc<dyn ChatAdapter>>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("models", &self.registry.models().len())
            .field("adapters", &self.adapters.keys().collect::<Vec<_>>())
            .field("retry", &self.retry)
            .finish()
    }
}

impl Gateway {
    pub fn builder(registry: Registry) -> GatewayBuilder {
        GatewayBuilder {
            registry,
            adapters: HashMap::new(),
            retry: RetryPolicy::default(),
        }
    }

    /// Builds the production gateway: real HTTP adapters for providers whose
    /// `PROVIDER_<NAME>_API_KEY` is set, or the mock for everything when the
    /// config names a mock script.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, GatewayError> {
        let registry = config.registry()?;
        let mut builder = Gateway::builder(registry).retry(RetryPolicy::from(&config.gateway));
        if let Some(path) = &config.mock_script {
            let script = MockScript::load(path)?;
            let mock = Arc::new(MockAdapter::new(script));
            for p in Provider::ALL {
                builder = builder.adapter_for(p, mock.clone());
            }
            return Ok(builder.build());
        }
        let timeout = Duration::from_secs(config.gateway.request_timeout_secs);
        let max_tokens = config.gateway.reserved_output_tokens;
        for provider in Provider::ALL {
            if provider == Provider::Mock {
                continue;
            }
            let Ok(key) = std::env::var(provider.api_key_var()) else {
                continue;
            };
            let base = config.providers.get(&provider).map(|e| e.base_url.clone());
            let adapter: Arc<dyn ChatAdapter> = match provider {
                Provider::OpenAiLike | Provider::GroqLike => {
                    Arc::new(OpenAiCompatibleAdapter::new(provider, key, base, timeout))
                }
                Provider::AnthropicLike => {
                    Arc::new(AnthropicAdapter::new(key, base, timeout, max_tokens))
                }
                Provider::CohereLike => Arc::new(CohereAdapter::new(key, base, timeout)),
                Provider::Mock => unreachable!(),
            };
            builder = builder.adapter(adapter);
        }
        Ok(builder.build())
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn registry_arc(&self) -> Arc<Registry> {
        self.registry.clone()
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    pub fn list_models(&self, tier_filter: Option<Tier>) -> Result<Vec<&ModelSpec>, GatewayError> {
        if self.registry.models().is_empty() {
            return Err(GatewayError::Config("model registry is empty".into()));
        }
        Ok(self.registry.list(tier_filter))
    }

    pub async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        self.dispatch(request, None).await
    }

    pub async fn complete_streaming(
        &self,
        request: &ChatRequest,
        sink: &ChunkSink,
    ) -> Result<ChatResponse, GatewayError> {
        self.dispatch(request, Some(sink)).await
    }

    async fn dispatch(
        &self,
        request: &ChatRequest,
        sink: Option<&ChunkSink>,
    ) -> Result<ChatResponse, GatewayError> {
        request.validate().map_err(GatewayError::Validation)?;
        let model = self
            .registry
            .get(&request.model_id)
            .ok_or_else(|| GatewayError::NotFound(request.model_id.clone()))?;
        let estimated = estimate_messages(&request.messages);
        if estimated > model.context_window as u64 {
            return Err(GatewayError::ContextOverflow {
                model_id: model.model_id.clone(),
                limit: model.context_window as u64,
                estimated,
            });
        }
        let adapter = self.adapters.get(&model.provider).ok_or_else(|| {
            GatewayError::Config(format!(
                "no adapter for provider {} (set {})",
                model.provider,
                model.provider.api_key_var()
            ))
        })?;

        let mut attempts = 0u32;
        let reply = loop {
            attempts += 1;
            let result = match sink {
                Some(s) => adapter.send_streaming(model, request, s).await,
                None => adapter.send(model, request).await,
            };
            match result {
                Ok(reply) => break reply,
                Err(AdapterError::Transport(msg)) if attempts <= self.retry.max_retries => {
                    log::warn!(
                        "{} transport failure on attempt {attempts} for {}: {msg}",
                        model.provider,
                        model.model_id
                    );
                    let backoff = self.retry.base_backoff * 2u32.saturating_pow(attempts - 1);
                    if !backoff.is_zero() {
                        tokio::time::sleep(backoff).await;
                    }
                }
                Err(AdapterError::Config(msg)) => return Err(GatewayError::Config(msg)),
                Err(e) => {
                    return Err(GatewayError::Upstream {
                        provider: model.provider,
                        model_id: model.model_id.clone(),
                        attempts,
                        message: e.to_string(),
                        alternates: self.registry.alternates(&model.model_id),
                    })
                }
            }
        };

        Ok(normalize(model, request, reply))
    }
}

fn normalize(model: &ModelSpec, request: &ChatRequest, reply: AdapterReply) -> ChatResponse {
    match reply.usage {
        Some(u) => ChatResponse {
            content: reply.content,
            input_tokens: u.input_tokens,
            output_tokens: u.output_tokens,
            usage_estimated: false,
            model_id: model.model_id.clone(),
        },
        None => ChatResponse {
            input_tokens: estimate_messages(&request.messages),
            output_tokens: estimate_tokens(&reply.content),
            content: reply.content,
            usage_estimated: true,
            model_id: model.model_id.clone(),
        },
    }
}

pub struct GatewayBuilder {
    registry: Registry,
    adapters: HashMap<Provider, Arc<dyn ChatAdapter>>,
    retry: RetryPolicy,
}

impl GatewayBuilder {
    pub fn adapter(mut self, adapter: Arc<dyn ChatAdapter>) -> Self {
        self.adapters.insert(adapter.provider(), adapter);
        self
    }

    /// Serves `provider` with `adapter` regardless of the adapter's own
    /// provider (used to put the mock behind every provider).
    pub fn adapter_for(mut self, provider: Provider, adapter: Arc<dyn ChatAdapter>) -> Self {
        self.adapters.insert(provider, adapter);
        self
    }

    pub fn retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn build(self) -> Gateway {
        Gateway {
            registry: Arc::new(self.registry),
            adapters: self.adapters,
            retry: self.retry,
        }
    }
}
