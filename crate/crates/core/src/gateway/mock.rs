//! Deterministic provider used for tests, demos and offline runs.
//!
//! Replies come from a script: rules keyed by request fingerprint or by the
//! last user message, an optional ordered sequence, and a default. Tests can
//! also queue replies, inject failures, hold requests at a gate and inspect
//! every request the adapter received.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tokio::sync::Semaphore;

use super::{
    AdapterError, AdapterReply, ChatAdapter, ChatRequest, ChunkSink, GatewayError, ModelSpec,
    Provider, ProviderUsage, Role,
};

const DEFAULT_CHUNK_CHARS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockReply {
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_tokens: Option<u64>,
    /// Streamed chunk size in characters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_chars: Option<usize>,
}

impl MockReply {
    pub fn text(content: impl Into<String>) -> Self {
        MockReply {
            content: content.into(),
            input_tokens: None,
            output_tokens: None,
            chunk_chars: None,
        }
    }

    pub fn with_usage(mut self, input: u64, output: u64) -> Self {
        self.input_tokens = Some(input);
        self.output_tokens = Some(output);
        self
    }

    pub fn with_chunk_chars(mut self, n: usize) -> Self {
        self.chunk_chars = Some(n);
        self
    }

    fn usage(&self) -> Option<ProviderUsage> {
        Some(ProviderUsage {
            input_tokens: self.input_tokens?,
            output_tokens: self.output_tokens?,
        })
    }

    /// Splits content into chunks of `chunk_chars` characters.
    pub fn chunks(&self) -> Vec<String> {
        let n = self.chunk_chars.unwrap_or(DEFAULT_CHUNK_CHARS).max(1);
        let chars: Vec<char> = self.content.chars().collect();
        chars.chunks(n).map(|c| c.iter().collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_user: Option<String>,
    #[serde(flatten)]
    pub reply: MockReply,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<MockReply>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<MockRule>,
    /// Replies handed out in order, one per request, before the default.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sequence: Vec<MockReply>,
}

impl MockScript {
    pub fn with_default(reply: MockReply) -> Self {
        MockScript {
            default: Some(reply),
            ..Default::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        toml::from_str(text).map_err(|e| GatewayError::Config(format!("mock script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("mock script {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Stable identity of a request: SHA-256 over the model id and the ordered
/// (role, content) pairs. Temperature is not part of it.
pub fn request_fingerprint(request: &ChatRequest) -> String {
    let mut h = Sha256::new();
    h.update(request.model_id.as_bytes());
    for m in &request.messages {
        h.update([0u8]);
        h.update(m.role.as_str().as_bytes());
        h.update([0u8]);
        h.update((m.content.len() as u64).to_le_bytes());
        h.update(m.content.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Default)]
pub struct MockAdapter {
    script: MockScript,
    sequence_pos: AtomicUsize,
    queue: Mutex<VecDeque<MockReply>>,
    failures: Mutex<VecDeque<AdapterError>>,
    captured: Mutex<Vec<ChatRequest>>,
    attempts: AtomicUsize,
    gate: Mutex<Option<Arc<Semaphore>>>,
}

impl MockAdapter {
    pub fn new(script: MockScript) -> Self {
        MockAdapter {
            script,
            ..Default::default()
        }
    }

    /// Queues replies served before any script lookup.
    pub fn push_reply(&self, reply: MockReply) {
        self.queue.lock().unwrap().push_back(reply);
    }

    /// The next `n` attempts fail with `error`.
    pub fn fail_next(&self, n: usize, error: AdapterError) {
        let mut f = self.failures.lock().unwrap();
        for _ in 0..n {
            f.push_back(error.clone());
        }
    }

    pub fn clear_failures(&self) {
        self.failures.lock().unwrap().clear();
    }

    /// Every request received, one entry per attempt.
    pub fn captured(&self) -> Vec<ChatRequest> {
        self.captured.lock().unwrap().clone()
    }

    pub fn clear_captured(&self) {
        self.captured.lock().unwrap().clear();
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }

    /// Holds each request until a permit is added to the semaphore.
    pub fn set_gate(&self, gate: Option<Arc<Semaphore>>) {
        *self.gate.lock().unwrap() = gate;
    }

    async fn resolve(&self, request: &ChatRequest) -> Result<MockReply, AdapterError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        self.captured.lock().unwrap().push(request.clone());
        let gate = self.gate.lock().unwrap().clone();
        if let Some(gate) = gate {
            if let Ok(permit) = gate.acquire().await {
                permit.forget();
            }
        }
        if let Some(err) = self.failures.lock().unwrap().pop_front() {
            return Err(err);
        }
        if let Some(reply) = self.queue.lock().unwrap().pop_front() {
            return Ok(reply);
        }
        let fingerprint = request_fingerprint(request);
        let last_user = request
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str());
        let rule = self
            .script
            .rules
            .iter()
            .find(|r| r.fingerprint.as_deref() == Some(fingerprint.as_str()))
            .or_else(|| {
                self.script
                    .rules
                    .iter()
                    .find(|r| r.fingerprint.is_none() && r.last_user.as_deref() == last_user)
            });
        if let Some(rule) = rule {
            return Ok(rule.reply.clone());
        }
        let pos = self.sequence_pos.fetch_add(1, Ordering::SeqCst);
        if let Some(reply) = self.script.sequence.get(pos) {
            return Ok(reply.clone());
        }
        self.script
            .default
            .clone()
            .ok_or_else(|| AdapterError::Rejected {
                status: 404,
                message: format!("mock script has no reply for fingerprint {fingerprint}"),
            })
    }
}

#[async_trait]
impl ChatAdapter for MockAdapter {
    fn provider(&self) -> Provider {
        Provider::Mock
    }

    async fn send(
        &self,
        _model: &ModelSpec,
        request: &ChatRequest,
    ) -> Result<AdapterReply, AdapterError> {
        let reply = self.resolve(request).await?;
        Ok(AdapterReply {
            usage: reply.usage(),
            content: reply.content,
        })
    }

    async fn send_streaming(
        &self,
        _model: &ModelSpec,
        request: &ChatRequest,
        sink: &ChunkSink,
    ) -> Result<AdapterReply, AdapterError> {
        let reply = self.resolve(request).await?;
        for chunk in reply.chunks() {
            let _ = sink.send(chunk);
        }
        Ok(AdapterReply {
            usage: reply.usage(),
            content: reply.content,
        })
    }
}
