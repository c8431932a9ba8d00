use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use chatisa_core::conversation::{EngineError, StoreError};
use chatisa_core::export::ExportError;
use chatisa_core::gateway::GatewayError;
use chatisa_core::ingest::{IngestError, UploadRejection};
use chatisa_core::prompts::PromptError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Validation,
    Policy,
    NotFound,
    Busy,
    Upstream,
    UnreadableDocument,
    ContextOverflow,
    Config,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 8] = [
        ErrorCode::Validation,
        ErrorCode::Policy,
        ErrorCode::NotFound,
        ErrorCode::Busy,
        ErrorCode::Upstream,
        ErrorCode::UnreadableDocument,
        ErrorCode::ContextOverflow,
        ErrorCode::Config,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Policy => StatusCode::FORBIDDEN,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Busy => StatusCode::CONFLICT,
            ErrorCode::Upstream => StatusCode::BAD_GATEWAY,
            ErrorCode::UnreadableDocument => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::ContextOverflow => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Config => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<Value>,
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Validation, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(json!({ "error": self }))).into_response()
    }
}

impl From<PromptError> for ApiError {
    fn from(e: PromptError) -> Self {
        let msg = e.to_string();
        match e {
            PromptError::Bindings(r) => ApiError::validation(msg)
                .with_details(json!({ "missing": r.missing, "extra": r.extra })),
            PromptError::EmptyValue(name) => {
                ApiError::validation(msg).with_details(json!({ "field": name }))
            }
            PromptError::UnknownTemplate(_) | PromptError::UnknownModule(_) => {
                ApiError::validation(msg)
            }
            PromptError::Index(_) => ApiError::new(ErrorCode::Config, msg),
        }
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        let msg = e.to_string();
        match e {
            GatewayError::Validation(_) => ApiError::validation(msg),
            GatewayError::NotFound(model) => {
                ApiError::validation(msg).with_details(json!({ "model_id": model }))
            }
            GatewayError::ContextOverflow {
                model_id,
                limit,
                estimated,
            } => ApiError::new(ErrorCode::ContextOverflow, msg).with_details(json!({
                "model_id": model_id, "limit": limit, "estimated": estimated
            })),
            GatewayError::Upstream {
                provider,
                model_id,
                attempts,
                alternates,
                ..
            } => ApiError::new(ErrorCode::Upstream, msg).with_details(json!({
                "provider": provider, "model_id": model_id,
                "attempts": attempts, "alternates": alternates
            })),
            GatewayError::Config(_) => ApiError::new(ErrorCode::Config, msg),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        EngineError::from(e).into()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::Validation(_) => ApiError::validation(msg),
            EngineError::Policy {
                module,
                model_id,
                allowed_models,
            } => ApiError::new(ErrorCode::Policy, msg).with_details(json!({
                "module": module, "model_id": model_id, "allowed_models": allowed_models
            })),
            EngineError::Prompt(p) => p.into(),
            EngineError::Gateway(g) => g.into(),
            EngineError::ContextOverflow {
                model_id,
                limit,
                budget,
                needed,
            } => ApiError::new(ErrorCode::ContextOverflow, msg).with_details(json!({
                "model_id": model_id, "limit": limit, "budget": budget, "needed": needed
            })),
            EngineError::Busy(id) => {
                ApiError::new(ErrorCode::Busy, msg).with_details(json!({ "session_id": id }))
            }
            EngineError::NotFound(id) => {
                ApiError::new(ErrorCode::NotFound, msg).with_details(json!({ "session_id": id }))
            }
            EngineError::Store(_) | EngineError::Corrupt(_) => {
                ApiError::new(ErrorCode::Config, msg)
            }
        }
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        let msg = e.to_string();
        match e {
            ExportError::Validation(_) => ApiError::validation(msg),
            ExportError::NothingToExport => {
                ApiError::validation(msg).with_details(json!({ "reason": "nothing_to_export" }))
            }
            ExportError::UnknownModel(_) => ApiError::new(ErrorCode::Config, msg),
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let msg = e.to_string();
        match e {
            IngestError::Parse(_) => ApiError::validation(msg),
            IngestError::Unreadable => ApiError::new(ErrorCode::UnreadableDocument, msg),
        }
    }
}

impl From<UploadRejection> for ApiError {
    fn from(e: UploadRejection) -> Self {
        let msg = e.to_string();
        match e {
            UploadRejection::NotPdf => ApiError::validation(msg),
            UploadRejection::TooLarge { size, limit } => {
                ApiError::validation(msg).with_details(json!({ "size": size, "limit": limit }))
            }
        }
    }
}
