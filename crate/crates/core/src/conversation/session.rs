use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::gateway::{ChatResponse, Message, Role};
use crate::prompts::{ModuleKind, TemplateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentLabel {
    pub name: String,
    pub course_number: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub any_estimated: bool,
}

/// Per-model token totals, in order of first use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UsageLedger {
    per_model: IndexMap<String, ModelUsage>,
}

impl UsageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, model_id: &str, input: u64, output: u64, estimated: bool) {
        let entry = self.per_model.entry(model_id.to_string()).or_default();
        entry.input_tokens += input;
        entry.output_tokens += output;
        entry.any_estimated |= estimated;
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelUsage> {
        self.per_model.get(model_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ModelUsage)> {
        self.per_model.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn is_empty(&self) -> bool {
        self.per_model.is_empty()
    }

    pub fn merge(&mut self, other: &UsageLedger) {
        for (model, u) in other.iter() {
            self.record(model, u.input_tokens, u.output_tokens, u.any_estimated);
        }
    }

    pub fn totals(&self) -> (u64, u64) {
        self.per_model.values().fold((0, 0), |(i, o), u| {
            (i + u.input_tokens, o + u.output_tokens)
        })
    }
}

/// One line of a session's append-only record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub event: SessionEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        session_id: String,
        module: ModuleKind,
        template_id: TemplateId,
        model_id: String,
        temperature: f64,
        system_prompt: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        student_label: Option<StudentLabel>,
    },
    UserMsg {
        content: String,
    },
    AssistantMsg {
        content: String,
        model_id: String,
    },
    ModelSwitched {
        from: String,
        to: String,
    },
    Usage {
        model_id: String,
        input_tokens: u64,
        output_tokens: u64,
        estimated: bool,
    },
}

impl SessionRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    /// Records for one successful turn, in the order they are persisted.
    pub fn turn(ts: DateTime<Utc>, user_text: &str, response: &ChatResponse) -> Vec<SessionRecord> {
        vec![
            SessionRecord {
                ts,
                event: SessionEvent::UserMsg {
                    content: user_text.to_string(),
                },
            },
            SessionRecord {
                ts,
                event: SessionEvent::AssistantMsg {
                    content: response.content.clone(),
                    model_id: response.model_id.clone(),
                },
            },
            SessionRecord {
                ts,
                event: SessionEvent::Usage {
                    model_id: response.model_id.clone(),
                    input_tokens: response.input_tokens,
                    output_tokens: response.output_tokens,
                    estimated: response.usage_estimated,
                },
            },
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: String,
    pub module: ModuleKind,
    pub template_id: TemplateId,
    pub model_id: String,
    pub temperature: f64,
    pub rendered_system_prompt: String,
    /// Completed user/assistant turns only; the system prompt is separate.
    pub history: Vec<Message>,
    pub usage: UsageLedger,
    pub created_at: DateTime<Utc>,
    pub student_label: Option<StudentLabel>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("corrupt session record {index}: {reason}")]
pub struct ReplayError {
    pub index: usize,
    pub reason: String,
}

impl Session {
    /// Rebuilds a session from its records; the first must be `created`.
    pub fn replay(records: &[SessionRecord]) -> Result<Session, ReplayError> {
        let Some((first, rest)) = records.split_first() else {
            return Err(ReplayError {
                index: 0,
                reason: "no records".into(),
            });
        };
        let SessionEvent::Created {
            session_id,
            module,
            template_id,
            model_id,
            temperature,
            system_prompt,
            student_label,
        } = &first.event
        else {
            return Err(ReplayError {
                index: 0,
                reason: "first record is not `created`".into(),
            });
        };
        let mut session = Session {
            session_id: session_id.clone(),
            module: *module,
            template_id: *template_id,
            model_id: model_id.clone(),
            temperature: *temperature,
            rendered_system_prompt: system_prompt.clone(),
            history: Vec::new(),
            usage: UsageLedger::new(),
            created_at: first.ts,
            student_label: student_label.clone(),
        };
        for (i, rec) in rest.iter().enumerate() {
            session.apply(&rec.event).map_err(|reason| ReplayError {
                index: i + 1,
                reason,
            })?;
        }
        Ok(session)
    }

    /// Applies one event, enforcing the alternation invariant.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), String> {
        match event {
            SessionEvent::Created { .. } => return Err("duplicate `created` record".into()),
            SessionEvent::UserMsg { content } => {
                if self.history.last().map(|m| m.role) == Some(Role::User) {
                    return Err("two consecutive user messages".into());
                }
                self.history.push(Message::user(content.clone()));
            }
            SessionEvent::AssistantMsg { content, .. } => {
                if self.history.last().map(|m| m.role) != Some(Role::User) {
                    return Err("assistant message without a preceding user message".into());
                }
                self.history.push(Message::assistant(content.clone()));
            }
            SessionEvent::ModelSwitched { to, .. } => self.model_id = to.clone(),
            SessionEvent::Usage {
                model_id,
                input_tokens,
                output_tokens,
                estimated,
            } => self
                .usage
                .record(model_id, *input_tokens, *output_tokens, *estimated),
        }
        Ok(())
    }

    pub fn turns(&self) -> usize {
        self.history.len() / 2
    }

    pub fn system_message(&self) -> Message {
        Message::system(self.rendered_system_prompt.clone())
    }

    /// Models that served at least one turn, in order of first use.
    pub fn models_used(&self) -> Vec<String> {
        self.usage.iter().map(|(m, _)| m.to_string()).collect()
    }
}
