//! Service operations shared by the HTTP API and the CLI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chatisa_core::clock::{Clock, IdSource, SystemClock, UuidIds};
use chatisa_core::config::ServiceConfig;
use chatisa_core::conversation::{
    Engine, FileStore, NewSession, RecordStore, Session, SessionEvent, SessionManager,
    StudentLabel, UsageLedger,
};
use chatisa_core::export::{self, BudgetReport};
use chatisa_core::gateway::{ChunkSink, Gateway, Message};
use chatisa_core::ingest::{self, MarkdownDocument};
use chatisa_core::money::Money;
use chatisa_core::prompts::{ModuleKind, PromptLibrary, TemplateId};
use chrono::Datelike;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ErrorCode};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelInfo {
    pub model_id: String,
    pub display_name: String,
    pub tier: String,
    pub provider: String,
    pub context_window: u32,
    pub input_price: Money,
    pub output_price: Money,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub module: String,
    pub model_id: String,
    #[serde(default)]
    pub template: Option<TemplateId>,
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    /// Placeholder name to uploaded document id.
    #[serde(default)]
    pub documents: BTreeMap<String, String>,
    #[serde(default)]
    pub student_label: Option<StudentLabel>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SessionView {
    pub session_id: String,
    pub module: ModuleKind,
    pub template_id: TemplateId,
    pub model_id: String,
    pub temperature: f64,
    pub system_prompt: String,
    pub history: Vec<Message>,
    pub usage: UsageLedger,
    pub turns: usize,
    pub created_at: chrono::DateTime<chrono::Utc>,
}

impl From<&Session> for SessionView {
    fn from(s: &Session) -> Self {
        SessionView {
            session_id: s.session_id.clone(),
            module: s.module,
            template_id: s.template_id,
            model_id: s.model_id.clone(),
            temperature: s.temperature,
            system_prompt: s.rendered_system_prompt.clone(),
            history: s.history.clone(),
            usage: s.usage.clone(),
            turns: s.turns(),
            created_at: s.created_at,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplyView {
    pub reply: String,
    pub model_id: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub estimated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DocumentInfo {
    pub document_id: String,
    pub source_name: String,
    pub page_count: usize,
    pub char_count: usize,
}

pub struct App {
    config: ServiceConfig,
    manager: SessionManager,
    documents: PathBuf,
}

impl App {
    pub fn new(
        config: ServiceConfig,
        gateway: Gateway,
        store: Arc<dyn RecordStore>,
        documents_dir: impl Into<PathBuf>,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdSource>,
    ) -> Result<App, ApiError> {
        let documents = documents_dir.into();
        std::fs::create_dir_all(&documents).map_err(|e| {
            ApiError::new(
                ErrorCode::Config,
                format!("documents dir {}: {e}", documents.display()),
            )
        })?;
        let reserved = config.gateway.reserved_output_tokens;
        let engine = Engine::new(
            Arc::new(gateway),
            Arc::new(PromptLibrary::builtin()),
            clock,
            ids,
            reserved,
        );
        Ok(App {
            config,
            manager: SessionManager::new(engine, store),
            documents,
        })
    }

    /// Production wiring: real providers (or the configured mock script),
    /// sessions and documents under `data_dir`, wall clock, random ids.
    pub fn open(config: ServiceConfig, data_dir: &Path) -> Result<App, ApiError> {
        let gateway = Gateway::from_config(&config)?;
        let store = FileStore::open(data_dir.join("sessions"))?;
        App::new(
            config,
            gateway,
            Arc::new(store),
            data_dir.join("documents"),
            Arc::new(SystemClock),
            Arc::new(UuidIds),
        )
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn manager(&self) -> &SessionManager {
        &self.manager
    }

    pub fn list_models(&self, module: Option<&str>) -> Result<Vec<ModelInfo>, ApiError> {
        let engine = self.manager.engine();
        let specs = match module {
            Some(m) => {
                let kind: ModuleKind = m.parse()?;
                engine.allowed_models(kind)
            }
            None => engine.gateway().list_models(None)?,
        };
        Ok(specs
            .into_iter()
            .map(|m| ModelInfo {
                model_id: m.model_id.clone(),
                display_name: m.display_name.clone(),
                tier: m.tier.as_str().to_string(),
                provider: m.provider.as_str().to_string(),
                context_window: m.context_window,
                input_price: m.input_price,
                output_price: m.output_price,
            })
            .collect())
    }

    pub fn create_session(&self, req: CreateSession) -> Result<SessionView, ApiError> {
        let module: ModuleKind = req.module.parse()?;
        let mut bindings = req.bindings;
        for (placeholder, doc_id) in req.documents {
            let doc = self.load_document(&doc_id)?;
            bindings.insert(placeholder, doc.markdown);
        }
        let session = self.manager.create(NewSession {
            module,
            template: req.template,
            model_id: req.model_id,
            bindings,
            student_label: req.student_label,
        })?;
        Ok(SessionView::from(&session))
    }

    pub async fn get_session(&self, id: &str) -> Result<SessionView, ApiError> {
        Ok(SessionView::from(&self.manager.snapshot(id).await?))
    }

    pub async fn post_message(
        &self,
        id: &str,
        text: &str,
        sink: Option<&ChunkSink>,
    ) -> Result<ReplyView, ApiError> {
        let turn = self.manager.post(id, text, sink).await?;
        let r = turn.response;
        Ok(ReplyView {
            reply: r.content,
            model_id: r.model_id,
            input_tokens: r.input_tokens,
            output_tokens: r.output_tokens,
            estimated: r.usage_estimated,
        })
    }

    pub async fn switch_model(&self, id: &str, model_id: &str) -> Result<SessionView, ApiError> {
        Ok(SessionView::from(
            &self.manager.switch_model(id, model_id).await?,
        ))
    }

    pub fn upload_document(
        &self,
        bytes: &[u8],
        source_name: &str,
    ) -> Result<DocumentInfo, ApiError> {
        ingest::validate_upload(bytes, self.config.max_upload_bytes as u64)?;
        let doc = ingest::extract_markdown(bytes, source_name)?;
        let id = format!("{:x}", Sha256::digest(bytes));
        let path = self.documents.join(format!("{id}.json"));
        let data = serde_json::to_vec(&doc).expect("document serializes");
        std::fs::write(&path, data)
            .map_err(|e| ApiError::new(ErrorCode::Config, format!("storing document: {e}")))?;
        Ok(DocumentInfo {
            document_id: id,
            source_name: doc.source_name,
            page_count: doc.page_count,
            char_count: doc.char_count,
        })
    }

    pub fn load_document(&self, id: &str) -> Result<MarkdownDocument, ApiError> {
        let not_found = || {
            ApiError::new(ErrorCode::NotFound, format!("unknown document {id:?}"))
                .with_details(json!({ "document_id": id }))
        };
        if id.len() != 64 || !id.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(not_found());
        }
        let data =
            std::fs::read(self.documents.join(format!("{id}.json"))).map_err(|_| not_found())?;
        #[derive(Deserialize)]
        struct Stored {
            markdown: String,
            page_count: usize,
            char_count: usize,
            source_name: String,
        }
        let s: Stored = serde_json::from_slice(&data)
            .map_err(|e| ApiError::new(ErrorCode::Config, format!("stored document {id}: {e}")))?;
        Ok(MarkdownDocument {
            markdown: s.markdown,
            page_count: s.page_count,
            char_count: s.char_count,
            source_name: s.source_name,
        })
    }

    pub async fn export_pdf(
        &self,
        id: &str,
        student_name: &str,
        course_number: &str,
    ) -> Result<(String, Vec<u8>), ApiError> {
        let session = self.manager.snapshot(id).await?;
        let engine = self.manager.engine();
        let pdf = export::render_transcript_pdf(
            &session,
            student_name,
            course_number,
            engine.gateway().registry(),
            engine.clock(),
        )?;
        let title = export::build_title(student_name, engine.clock().now().date_naive())?;
        Ok((title, pdf))
    }

    /// Spend so far this calendar month across every stored session.
    pub fn budget(&self) -> Result<BudgetReport, ApiError> {
        let limit = self
            .config
            .monthly_budget
            .ok_or_else(|| ApiError::new(ErrorCode::Config, "no monthly_budget configured"))?;
        let now = self.manager.engine().clock().now();
        let mut ledgers = Vec::new();
        for id in self.manager.session_ids()? {
            let mut ledger = UsageLedger::new();
            for rec in self.manager.store().load(&id)? {
                if rec.ts.year() != now.year() || rec.ts.month() != now.month() {
                    continue;
                }
                if let SessionEvent::Usage {
                    model_id,
                    input_tokens,
                    output_tokens,
                    estimated,
                } = rec.event
                {
                    ledger.record(&model_id, input_tokens, output_tokens, estimated);
                }
            }
            ledgers.push(ledger);
        }
        let report = export::check_budget(
            &ledgers,
            self.manager.engine().gateway().registry(),
            limit,
            self.config.budget_warn_ratio,
        )?;
        Ok(report)
    }
}
