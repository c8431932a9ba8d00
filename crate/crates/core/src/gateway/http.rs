//! HTTP adapters speaking each provider's native chat contract.

use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use super::{
    AdapterError, AdapterReply, ChatAdapter, ChatRequest, ModelSpec, Provider, ProviderUsage, Role,
};

const OPENAI_BASE: &str = "https://api.openai.com/v1";
const GROQ_BASE: &str = "https://api.groq.com/openai/v1";
const ANTHROPIC_BASE: &str = "https://api.anthropic.com";
const ANTHROPIC_VERSION: &str = "2023-06-01";
const COHERE_BASE: &str = "https://api.cohere.com";

fn client(timeout: Duration) -> reqwest::Client {
    reqwest::Client::builder()
        .timeout(timeout)
        .build()
        .expect("reqwest client")
}

async fn post_json(req: reqwest::RequestBuilder, body: &Value) -> Result<Value, AdapterError> {
    let resp = req
        .json(body)
        .send()
        .await
        .map_err(|e| AdapterError::Transport(e.to_string()))?;
    let status = resp.status();
    let text = resp
        .text()
        .await
        .map_err(|e| AdapterError::Transport(e.to_string()))?;
    if status.is_server_error() {
        return Err(AdapterError::Transport(format!(
            "HTTP {status}: {}",
            snippet(&text)
        )));
    }
    if !status.is_success() {
        return Err(AdapterError::Rejected {
            status: status.as_u16(),
            message: snippet(&text),
        });
    }
    serde_json::from_str(&text)
        .map_err(|e| AdapterError::Transport(format!("malformed response body: {e}")))
}

fn snippet(text: &str) -> String {
    text.chars().take(300).collect()
}

fn u64_at(v: &Value, path: &[&str]) -> Option<u64> {
    let mut cur = v;
    for p in path {
        cur = cur.get(p)?;
    }
    cur.as_u64()
}

fn usage_from(v: &Value, input: &[&str], output: &[&str]) -> Option<ProviderUsage> {
    Some(ProviderUsage {
        input_tokens: u64_at(v, input)?,
        output_tokens: u64_at(v, output)?,
    })
}

/// OpenAI chat-completions wire format; Groq serves the same contract.
#[derive(Debug, Clone)]
pub struct OpenAiCompatibleAdapter {
    provider: Provider,
    api_key: String,
    base_url: String,
    http: reqwest::Client,
}

impl OpenAiCompatibleAdapter {
    pub fn new(
        provider: Provider,
        api_key: String,
        base_url: Option<String>,
        timeout: Duration,
    ) -> Self {
        let default = if provider == Provider::GroqLike {
            GROQ_BASE
        } else {
            OPENAI_BASE
        };
        OpenAiCompatibleAdapter {
            provider,
            api_key,
            base_url: base_url.unwrap_or_else(|| default.to_string()),
            http: client(timeout),
        }
    }

    pub fn request_body(request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
        })
    }

    pub fn parse_response(v: &Value) -> Result<AdapterReply, AdapterError> {
        let content = v
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| {
                AdapterError::Transport("response has no choices[0].message.content".into())
            })?;
        Ok(AdapterReply {
            content: content.to_string(),
            usage: usage_from(
                v,
                &["usage", "prompt_tokens"],
                &["usage", "completion_tokens"],
            ),
        })
    }
}

#[async_trait]
impl ChatAdapter for OpenAiCompatibleAdapter {
    fn provider(&self) -> Provider {
        self.provider
    }

    async fn send(
        &self,
        _model: &ModelSpec,
        request: &ChatRequest,
    ) -> Result<AdapterReply, AdapterError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let v = post_json(
            self.http.post(url).bearer_auth(&self.api_key),
            &Self::request_body(request),
        )
        .await?;
        Self::parse_response(&v)
    }
}

/// Anthropic messages API: the system prompt travels outside the message list.
#[derive(Debug, Clone)]
pub struct AnthropicAdapter {
    api_key: String,
    base_url: String,
    max_tokens: u32,
    http: reqwest::Client,
}

impl AnthropicAdapter {
    pub fn new(
        api_key: String,
        base_url: Option<String>,
        timeout: Duration,
        max_tokens: u32,
    ) -> Self {
        AnthropicAdapter {
            api_key,
            base_url: base_url.unwrap_or_else(|| ANTHROPIC_BASE.to_string()),
            max_tokens,
            http: client(timeout),
        }
    }

    pub fn request_body(request: &ChatRequest, max_tokens: u32) -> Value {
        let system: Vec<&str> = request
            .messages
            .iter()
            .filter(|m| m.role == Role::System)
            .map(|m| m.content.as_str())
            .collect();
        let messages: Vec<Value> = request
            .messages
            .iter()
            .filter(|m| m.role != Role::System)
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        json!({
            "model": request.model_id,
            "system": system.join("\n\n"),
            "messages": messages,
            "max_tokens": max_tokens,
            "temperature": request.temperature,
        })
    }

    pub fn parse_response(v: &Value) -> Result<AdapterReply, AdapterError> {
        let blocks = v
            .get("content")
            .and_then(Value::as_array)
            .ok_or_else(|| AdapterError::Transport("response has no content blocks".into()))?;
        let content: String = blocks
            .iter()
            .filter(|b| b.get("type").and_then(Value::as_str) == Some("text"))
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect();
        Ok(AdapterReply {
            content,
            usage: usage_from(v, &["usage", "input_tokens"], &["usage", "output_tokens"]),
        })
    }
}

#[async_trait]
impl ChatAdapter for AnthropicAdapter {
    fn provider(&self) -> Provider {
        Provider::AnthropicLike
    }

    async fn send(
        &self,
        _model: &ModelSpec,
        request: &ChatRequest,
    ) -> Result<AdapterReply, AdapterError> {
        let url = format!("{}/v1/messages", self.base_url.trim_end_matches('/'));
        let v = post_json(
            self.http
                .post(url)
                .header("x-api-key", &self.api_key)
                .header("anthropic-version", ANTHROPIC_VERSION),
            &Self::request_body(request, self.max_tokens),
        )
        .await?;
        Self::parse_response(&v)
    }
}

/// Cohere v2 chat API.
#[derive(Debug, Clone)]
pub struct CohereAdapter {
    api_key: String,
    base_url: String,
    http: reqwest::Client,
}

impl CohereAdapter {
    pub fn new(api_key: String, base_url: Option<String>, timeout: Duration) -> Self {
        CohereAdapter {
            api_key,
            base_url: base_url.unwrap_or_else(|| COHERE_BASE.to_string()),
            http: client(timeout),
        }
    }

    pub fn request_body(request: &ChatRequest) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
        })
    }

    pub fn parse_response(v: &Value) -> Result<AdapterReply, AdapterError> {
        let blocks = v
            .pointer("/message/content")
            .and_then(Value::as_array)
            .ok_or_else(|| AdapterError::Transport("response has no message.content".into()))?;
        let content: String = blocks
            .iter()
            .filter_map(|b| b.get("text").and_then(Value::as_str))
            .collect();
        let usage = usage_from(
            v,
            &["usage", "tokens", "input_tokens"],
            &["usage", "tokens", "output_tokens"],
        )
        .or_else(|| {
            usage_from(
                v,
                &["usage", "billed_units", "input_tokens"],
                &["usage", "billed_units", "output_tokens"],
            )
        });
        Ok(AdapterReply { content, usage })
    }
}

#[async_trait]
impl ChatAdapter for CohereAdapter {
    fn provider(&self) -> Provider {
        Provider::CohereLike
    }

    async fn send(
        &self,
        _model: &ModelSpec,
        request: &ChatRequest,
    ) -> Result<AdapterReply, AdapterError> {
        let url = format!("{}/v2/chat", self.base_url.trim_end_matches('/'));
        let v = post_json(
            self.http.post(url).bearer_auth(&self.api_key),
            &Self::request_body(request),
        )
        .await?;
        Self::parse_response(&v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Message;

    fn req() -> ChatRequest {
        ChatRequest {
            model_id: "claude-3-7-sonnet-20250219".into(),
            messages: vec![
                Message::system("sys"),
                Message::user("q1"),
                Message::assistant("a1"),
                Message::user("q2"),
            ],
            temperature: 0.25,
        }
    }

    #[test]
    fn openai_body_keeps_messages_in_order() {
        let body = OpenAiCompatibleAdapter::request_body(&req());
        let roles: Vec<_> = body["messages"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["role"].as_str().unwrap().to_string())
            .collect();
        assert_eq!(roles, ["system", "user", "assistant", "user"]);
        assert_eq!(body["temperature"], json!(0.25));
    }

    #[test]
    fn anthropic_body_lifts_system() {
        let body = AnthropicAdapter::request_body(&req(), 1024);
        assert_eq!(body["system"], "sys");
        assert_eq!(body["messages"].as_array().unwrap().len(), 3);
        assert_eq!(body["max_tokens"], 1024);
    }

    #[test]
    fn parses_usage_variants() {
        let openai = json!({
            "choices": [{"message": {"role": "assistant", "content": "hi"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 3}
        });
        let r = OpenAiCompatibleAdapter::parse_response(&openai).unwrap();
        assert_eq!(r.content, "hi");
        assert_eq!(
            r.usage,
            Some(ProviderUsage {
                input_tokens: 12,
                output_tokens: 3
            })
        );

        let no_usage = json!({"choices": [{"message": {"content": "hi"}}]});
        assert_eq!(
            OpenAiCompatibleAdapter::parse_response(&no_usage)
                .unwrap()
                .usage,
            None
        );

        let anthropic = json!({
            "content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}],
            "usage": {"input_tokens": 7, "output_tokens": 2}
        });
        let r = AnthropicAdapter::parse_response(&anthropic).unwrap();
        assert_eq!(r.content, "ab");
        assert_eq!(r.usage.unwrap().input_tokens, 7);

        let cohere = json!({
            "message": {"role": "assistant", "content": [{"type": "text", "text": "c"}]},
            "usage": {"billed_units": {"input_tokens": 4, "output_tokens": 1}}
        });
        let r = CohereAdapter::parse_response(&cohere).unwrap();
        assert_eq!(r.content, "c");
        assert_eq!(
            r.usage,
            Some(ProviderUsage {
                input_tokens: 4,
                output_tokens: 1
            })
        );

        assert!(CohereAdapter::parse_response(&json!({})).is_err());
    }
}
