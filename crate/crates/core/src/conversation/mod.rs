//! Module-bound tutoring sessions over stateless chat APIs.
//!
//! Every turn resends the whole conversation: the rendered system prompt, all
//! completed (user, assistant) pairs in order, then the new user message. When
//! that does not fit the model's window (minus the reply reserve) the oldest
//! pairs are dropped. A turn only touches the session after the provider
//! answered and its records were persisted.

mod policy;
mod session;
mod store;
mod truncate;

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;
use tokio::sync::Mutex;

pub use policy::{ModulePolicy, EXAM_STYLES};
pub use session::{
    ModelUsage, ReplayError, Session, SessionEvent, SessionRecord, StudentLabel, UsageLedger,
};
pub use store::{valid_session_id, FileStore, MemoryStore, RecordStore, StoreError};
pub use truncate::{prompt_budget, truncate_for_context, Overflow};

use crate::clock::{Clock, IdSource};
use crate::gateway::{
    ChatRequest, ChatResponse, ChunkSink, Gateway, GatewayError, Message, ModelSpec,
};
use crate::prompts::{Bindings, ModuleKind, PromptError, PromptLibrary, TemplateId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{0}")]
    Validation(String),
    #[error("{model_id} is not available for the {module} module; choose one of: {}", allowed_models.join(", "))]
    Policy {
        module: ModuleKind,
        model_id: String,
        allowed_models: Vec<String>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("conversation no longer fits {model_id}: the system prompt and new message need ~{needed} tokens of a {budget}-token prompt budget (context window {limit})")]
    ContextOverflow {
        model_id: String,
        limit: u64,
        budget: u64,
        needed: u64,
    },
    #[error("session {0} is busy with another message")]
    Busy(String),
    #[error("unknown session {0:?}")]
    NotFound(String),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Corrupt(#[from] ReplayError),
}

impl From<StoreError> for EngineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) | StoreError::InvalidId(id) => EngineError::NotFound(id),
            other => EngineError::Store(other),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewSession {
    pub module: ModuleKind,
    /// Defaults to the module's primary template (the scoping coach for
    /// projects).
    pub template: Option<TemplateId>,
    pub model_id: String,
    pub bindings: Bindings,
    pub student_label: Option<StudentLabel>,
}

impl NewSession {
    pub fn new(module: ModuleKind, model_id: impl Into<String>) -> Self {
        NewSession {
            module,
            template: None,
            model_id: model_id.into(),
            bindings: Bindings::new(),
            student_label: None,
        }
    }

    pub fn bind(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.bindings.insert(name.into(), value.into());
        self
    }

    pub fn template(mut self, id: TemplateId) -> Self {
        self.template = Some(id);
        self
    }
}

/// A completed turn that has not been applied to its session yet.
#[derive(Debug, Clone)]
pub struct Turn {
    pub request: ChatRequest,
    pub response: ChatResponse,
    pub records: Vec<SessionRecord>,
}

pub struct Engine {
    gateway: Arc<Gateway>,
    prompts: Arc<PromptLibrary>,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdSource>,
    reserved_output: u32,
}

impl Engine {
    pub fn new(
        gateway: Arc<Gateway>,
        prompts: Arc<PromptLibrary>,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdSource>,
        reserved_output: u32,
    ) -> Self {
        Engine {
            gateway,
            prompts,
            clock,
            ids,
            reserved_output,
        }
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn prompts(&self) -> &PromptLibrary {
        &self.prompts
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    /// Models a module may use, in registry order.
    pub fn allowed_models(&self, module: ModuleKind) -> Vec<&ModelSpec> {
        let policy = ModulePolicy::for_module(module);
        self.gateway
            .registry()
            .models()
            .iter()
            .filter(|m| policy.allows(m.tier))
            .collect()
    }

    fn check_model(&self, module: ModuleKind, model_id: &str) -> Result<&ModelSpec, EngineError> {
        let spec = self
            .gateway
            .registry()
            .get(model_id)
            .ok_or_else(|| GatewayError::NotFound(model_id.to_string()))?;
        if !ModulePolicy::for_module(module).allows(spec.tier) {
            return Err(EngineError::Policy {
                module,
                model_id: model_id.to_string(),
                allowed_models: self
                    .allowed_models(module)
                    .iter()
                    .map(|m| m.model_id.clone())
                    .collect(),
            });
        }
        Ok(spec)
    }

    pub fn create_session(&self, req: NewSession) -> Result<(Session, SessionRecord), EngineError> {
        let policy = ModulePolicy::for_module(req.module);
        let template_id = req
            .template
            .unwrap_or_else(|| TemplateId::default_for(req.module));
        let template = self.prompts.get(template_id);
        if template.module != req.module {
            return Err(EngineError::Validation(format!(
                "template {template_id} belongs to the {} module, not {}",
                template.module, req.module
            )));
        }
        self.check_model(req.module, &req.model_id)?;
        if req.module == ModuleKind::Exam {
            if let Some(style) = req.bindings.get("exam_type") {
                if !EXAM_STYLES.contains(&style.as_str()) {
                    return Err(EngineError::Validation(format!(
                        "exam_type {style:?} is not one of: {}",
                        EXAM_STYLES.join(", ")
                    )));
                }
            }
        }
        let mut bindings = req.bindings;
        for name in &template.placeholders {
            if !bindings.contains_key(name) {
                if let Some(default) = self.prompts.default_binding(name) {
                    bindings.insert(name.clone(), default.to_string());
                }
            }
        }
        let system_prompt = self.prompts.render(template_id, &bindings)?;

        let created_at = self.clock.now();
        let session = Session {
            session_id: self.ids.next_id(),
            module: req.module,
            template_id,
            model_id: req.model_id,
            temperature: policy.temperature,
            rendered_system_prompt: system_prompt,
            history: Vec::new(),
            usage: UsageLedger::new(),
            created_at,
            student_label: req.student_label,
        };
        let record = SessionRecord {
            ts: created_at,
            event: SessionEvent::Created {
                session_id: session.session_id.clone(),
                module: session.module,
                template_id,
                model_id: session.model_id.clone(),
                temperature: session.temperature,
                system_prompt: session.rendered_system_prompt.clone(),
                student_label: session.student_label.clone(),
            },
        };
        Ok((session, record))
    }

    /// The payload for the next turn: system prompt, prior history and the
    /// new message, truncated to the model's prompt budget if needed.
    pub fn build_request(&self, session: &Session, text: &str) -> Result<ChatRequest, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::Validation("message text is empty".into()));
        }
        let model = self
            .gateway
            .registry()
            .get(&session.model_id)
            .ok_or_else(|| GatewayError::NotFound(session.model_id.clone()))?;
        let budget = prompt_budget(model.context_window, self.reserved_output);
        let messages = truncate_for_context(
            &session.system_message(),
            &session.history,
            &Message::user(text),
            budget,
        )
        .map_err(|o| EngineError::ContextOverflow {
            model_id: model.model_id.clone(),
            limit: model.context_window as u64,
            budget: o.budget,
            needed: o.needed,
        })?;
        Ok(ChatRequest {
            model_id: session.model_id.clone(),
            messages,
            temperature: ModulePolicy::for_module(session.module).temperature,
        })
    }

    /// Runs one turn without touching `session`.
    pub async fn run_turn(
        &self,
        session: &Session,
        text: &str,
        sink: Option<&ChunkSink>,
    ) -> Result<Turn, EngineError> {
        let request = self.build_request(session, text)?;
        let response = match sink {
            Some(s) => self.gateway.complete_streaming(&request, s).await?,
            None => self.gateway.complete(&request).await?,
        };
        let records = SessionRecord::turn(self.clock.now(), text, &response);
        Ok(Turn {
            request,
            response,
            records,
        })
    }

    /// Runs a turn and applies it to an in-memory session.
    pub async fn post_user_message(
        &self,
        session: &mut Session,
        text: &str,
    ) -> Result<(Message, ChatResponse), EngineError> {
        let turn = self.run_turn(session, text, None).await?;
        apply_all(session, &turn.records)?;
        Ok((
            Message::assistant(turn.response.content.clone()),
            turn.response,
        ))
    }

    /// Record for a model switch, or `None` when the model is unchanged.
    pub fn switch_model(
        &self,
        session: &Session,
        new_model_id: &str,
    ) -> Result<Option<SessionRecord>, EngineError> {
        self.check_model(session.module, new_model_id)?;
        if new_model_id == session.model_id {
            return Ok(None);
        }
        Ok(Some(SessionRecord {
            ts: self.clock.now(),
            event: SessionEvent::ModelSwitched {
                from: session.model_id.clone(),
                to: new_model_id.to_string(),
            },
        }))
    }
}

fn apply_all(session: &mut Session, records: &[SessionRecord]) -> Result<(), EngineError> {
    for r in records {
        session
            .apply(&r.event)
            .map_err(|reason| ReplayError { index: 0, reason })?;
    }
    Ok(())
}

/// Live sessions backed by a record store. Turns within one session are
/// serialized: a post while another is in flight fails with `Busy`.
pub struct SessionManager {
    engine: Engine,
    store: Arc<dyn RecordStore>,
    active: std::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl SessionManager {
    pub fn new(engine: Engine, store: Arc<dyn RecordStore>) -> Self {
        SessionManager {
            engine,
            store,
            active: Default::default(),
        }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn store(&self) -> &dyn RecordStore {
        self.store.as_ref()
    }

    pub fn create(&self, req: NewSession) -> Result<Session, EngineError> {
        let (session, record) = self.engine.create_session(req)?;
        self.store.append(&session.session_id, &[record])?;
        self.active.lock().unwrap().insert(
            session.session_id.clone(),
            Arc::new(Mutex::new(session.clone())),
        );
        Ok(session)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, EngineError> {
        if let Some(h) = self.active.lock().unwrap().get(id) {
            return Ok(h.clone());
        }
        let records = self.store.load(id)?;
        let session = Session::replay(&records)?;
        let mut active = self.active.lock().unwrap();
        Ok(active
            .entry(id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(session)))
            .clone())
    }

    /// Current state of a session, waiting for any in-flight turn.
    pub async fn snapshot(&self, id: &str) -> Result<Session, EngineError> {
        let h = self.handle(id)?;
        let guard = h.lock().await;
        Ok(guard.clone())
    }

    pub async fn post(
        &self,
        id: &str,
        text: &str,
        sink: Option<&ChunkSink>,
    ) -> Result<Turn, EngineError> {
        let h = self.handle(id)?;
        let mut guard = h
            .try_lock_owned()
            .map_err(|_| EngineError::Busy(id.to_string()))?;
        let turn = self.engine.run_turn(&guard, text, sink).await?;
        let mut next = guard.clone();
        apply_all(&mut next, &turn.records)?;
        self.store.append(id, &turn.records)?;
        *guard = next;
        Ok(turn)
    }

    pub async fn switch_model(&self, id: &str, model_id: &str) -> Result<Session, EngineError> {
        let h = self.handle(id)?;
        let mut guard = h
            .try_lock_owned()
            .map_err(|_| EngineError::Busy(id.to_string()))?;
        if let Some(record) = self.engine.switch_model(&guard, model_id)? {
            let mut next = guard.clone();
            apply_all(&mut next, std::slice::from_ref(&record))?;
            self.store.append(id, &[record])?;
            *guard = next;
        }
        Ok(guard.clone())
    }

    pub fn raw_records(&self, id: &str) -> Result<String, EngineError> {
        Ok(self.store.raw(id)?)
    }

    pub fn session_ids(&self) -> Result<Vec<String>, EngineError> {
        Ok(self.store.ids()?)
    }
}
