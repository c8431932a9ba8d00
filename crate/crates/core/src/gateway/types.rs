use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provider {
    #[serde(rename = "openai-like")]
    OpenAiLike,
    #[serde(rename = "anthropic-like")]
    AnthropicLike,
    #[serde(rename = "cohere-like")]
    CohereLike,
    #[serde(rename = "groq-like")]
    GroqLike,
    #[serde(rename = "mock")]
    Mock,
}

impl Provider {
    pub const ALL: [Provider; 5] = [
        Provider::OpenAiLike,
        Provider::AnthropicLike,
        Provider::CohereLike,
        Provider::GroqLike,
        Provider::Mock,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Provider::OpenAiLike => "openai-like",
            Provider::AnthropicLike => "anthropic-like",
            Provider::CohereLike => "cohere-like",
            Provider::GroqLike => "groq-like",
            Provider::Mock => "mock",
        }
    }

    /// `<NAME>` in the `PROVIDER_<NAME>_API_KEY` credential variable.
    pub fn env_name(self) -> &'static str {
        match self {
            Provider::OpenAiLike => "OPENAI",
            Provider::AnthropicLike => "ANTHROPIC",
            Provider::CohereLike => "COHERE",
            Provider::GroqLike => "GROQ",
            Provider::Mock => "MOCK",
        }
    }

    pub fn api_key_var(self) -> String {
        format!("PROVIDER_{}_API_KEY", self.env_name())
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Frontier,
    Light,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Frontier => "frontier",
            Tier::Light => "light",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frontier" => Ok(Tier::Frontier),
            "light" => Ok(Tier::Light),
            other => Err(format!("unknown tier {other:?}")),
        }
    }
}

/// One model the service can route to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub provider: Provider,
    pub tier: Tier,
    pub context_window: u32,
    /// Per 1,000,000 input tokens.
    pub input_price: Money,
    /// Per 1,000,000 output tokens.
    pub output_price: Money,
    pub display_name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Message::new(Role::Assistant, content)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

impl ChatRequest {
    /// Checks the message-shape invariants: a single leading system message,
    /// then strictly alternating user/assistant turns ending with a user turn,
    /// no blank content, and a temperature in [0, 1].
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 1]", self.temperature));
        }
        let Some(first) = self.messages.first() else {
            return Err("request has no messages".into());
        };
        if first.role != Role::System {
            return Err("first message must be the system prompt".into());
        }
        if self.messages.len() < 2 {
            return Err("request must end with a user message".into());
        }
        for (i, msg) in self.messages.iter().enumerate() {
            if msg.content.trim().is_empty() {
                return Err(format!("message {i} ({}) is blank", msg.role));
            }
            if i == 0 {
                continue;
            }
            let expected = if i % 2 == 1 {
                Role::User
            } else {
                Role::Assistant
            };
            if msg.role != expected {
                return Err(format!(
                    "message {i} has role {} but {} was expected",
                    msg.role, expected
                ));
            }
        }
        if self.messages.last().map(|m| m.role) != Some(Role::User) {
            return Err("request must end with a user message".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Counts came from the local estimator because the provider sent none.
    pub usage_estimated: bool,
    pub model_id: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(msgs: Vec<Message>) -> ChatRequest {
        ChatRequest {
            model_id: "m".into(),
            messages: msgs,
            temperature: 0.0,
        }
    }

    #[test]
    fn validates_alternation() {
        assert!(req(vec![Message::system("s"), Message::user("u")])
            .validate()
            .is_ok());
        assert!(req(vec![
            Message::system("s"),
            Message::user("u"),
            Message::assistant("a"),
            Message::user("u2"),
        ])
        .validate()
        .is_ok());

        let two_users = req(vec![
            Message::system("s"),
            Message::user("u"),
            Message::user("u2"),
        ]);
        assert!(two_users.validate().is_err());

        let ends_assistant = req(vec![
            Message::system("s"),
            Message::user("u"),
            Message::assistant("a"),
        ]);
        assert!(ends_assistant.validate().is_err());

        let two_system = req(vec![
            Message::system("s"),
            Message::system("s2"),
            Message::user("u"),
        ]);
        assert!(two_system.validate().is_err());

        assert!(req(vec![Message::user("u")]).validate().is_err());
        assert!(req(vec![Message::system("s")]).validate().is_err());
        assert!(req(vec![Message::system("s"), Message::user("  \n")])
            .validate()
            .is_err());
    }

    #[test]
    fn temperature_range() {
        let mut r = req(vec![Message::system("s"), Message::user("u")]);
        r.temperature = 1.5;
        assert!(r.validate().is_err());
        r.temperature = 0.25;
        assert!(r.validate().is_ok());
    }

    #[test]
    fn provider_serde_names() {
        let p: Provider = serde_json::from_str("\"anthropic-like\"").unwrap();
        assert_eq!(p, Provider::AnthropicLike);
        assert_eq!(Provider::GroqLike.api_key_var(), "PROVIDER_GROQ_API_KEY");
    }
}
