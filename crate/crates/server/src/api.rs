//! JSON-over-HTTP routes.
//!
//! Every failure is `{"error": {"code", "message", "details"?}}` with the
//! status from [`ErrorCode::status`]. Message posts stream newline-delimited
//! JSON events unless `?stream=false` is given.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::mpsc;

use crate::app::{App, CreateSession};
use crate::error::{ApiError, ErrorCode};

pub const NDJSON: &str = "application/x-ndjson";

/// `Json` whose rejections use the error envelope.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(e) => Err(ApiError::validation(e.body_text())),
        }
    }
}

pub fn router(app: Arc<App>) -> Router {
    Router::new()
        .route("/api/models", get(list_models))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/records", get(get_records))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/model", post(switch_model))
        .route("/api/sessions/{id}/export", post(export))
        .route("/api/documents", post(upload_document))
        .route("/api/budget", get(budget))
        .fallback(|| async { ApiError::new(ErrorCode::NotFound, "no such route") })
        .with_state(app)
}

type Params = Query<HashMap<String, String>>;

async fn list_models(State(app): State<Arc<App>>, Query(q): Params) -> Result<Response, ApiError> {
    let models = app.list_models(q.get("module").map(String::as_str))?;
    Ok(Json(json!({ "models": models })).into_response())
}

async fn create_session(
    State(app): State<Arc<App>>,
    ApiJson(req): ApiJson<CreateSession>,
) -> Result<Response, ApiError> {
    let view = app.create_session(req)?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    Ok(Json(app.get_session(&id).await?).into_response())
}

async fn get_records(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let raw = app.manager().raw_records(&id)?;
    Ok(([(header::CONTENT_TYPE, NDJSON)], raw).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PostBody {
    text: String,
}

fn event_line(v: Value) -> Result<Bytes, Infallible> {
    let mut line = v.to_string();
    line.push('\n');
    Ok(Bytes::from(line))
}

async fn post_message(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    Query(q): Params,
    ApiJson(body): ApiJson<PostBody>,
) -> Result<Response, ApiError> {
    let streaming = match q.get("stream").map(String::as_str) {
        None | Some("true") | Some("1") => true,
        Some("false") | Some("0") => false,
        Some(other) => {
            return Err(ApiError::validation(format!(
                "stream={other:?} is not a boolean"
            )))
        }
    };
    if !streaming {
        return Ok(Json(app.post_message(&id, &body.text, None).await?).into_response());
    }

    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    let task = tokio::spawn(async move {
        let r = app.post_message(&id, &body.text, Some(&tx)).await;
        drop(tx);
        r
    });
    let first = rx.recv().await;
    if first.is_none() {
        // finished before any chunk; a failure here still gets a real status
        let result = task
            .await
            .map_err(|e| ApiError::new(ErrorCode::Config, format!("turn task: {e}")))?;
        let reply = result?;
        let lines = vec![
            event_line(json!({ "type": "chunk", "text": reply.reply })),
            event_line(json!({ "type": "done", "reply": reply })),
        ];
        return Ok(ndjson(Body::from_stream(stream::iter(lines))));
    }

    let chunks = stream::iter(first).chain(stream::unfold(rx, |mut rx| async move {
        rx.recv().await.map(|c| (c, rx))
    }));
    let events = chunks
        .map(|text| event_line(json!({ "type": "chunk", "text": text })))
        .chain(stream::once(async move {
            let v = match task.await {
                Ok(Ok(reply)) => json!({ "type": "done", "reply": reply }),
                Ok(Err(e)) => json!({ "type": "error", "error": e }),
                Err(e) => json!({
                    "type": "error",
                    "error": ApiError::new(ErrorCode::Config, format!("turn task: {e}"))
                }),
            };
            event_line(v)
        }));
    Ok(ndjson(Body::from_stream(events)))
}

fn ndjson(body: Body) -> Response {
    let mut r = Response::new(body);
    r.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(NDJSON));
    r
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SwitchBody {
    model_id: String,
}

async fn switch_model(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<SwitchBody>,
) -> Result<Response, ApiError> {
    Ok(Json(app.switch_model(&id, &body.model_id).await?).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportBody {
    student_name: String,
    course_number: String,
}

async fn export(
    State(app): State<Arc<App>>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<ExportBody>,
) -> Result<Response, ApiError> {
    let (title, pdf) = app
        .export_pdf(&id, &body.student_name, &body.course_number)
        .await?;
    let filename: String = title
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    let disposition = format!("attachment; filename=\"{filename}.pdf\"");
    Ok((
        [
            (header::CONTENT_TYPE, "application/pdf".to_string()),
            (header::CONTENT_DISPOSITION, disposition),
        ],
        pdf,
    )
        .into_response())
}

/// Raw PDF bytes as the body; `?name=` sets the source name.
async fn upload_document(
    State(app): State<Arc<App>>,
    Query(q): Params,
    body: Body,
) -> Result<Response, ApiError> {
    let limit = app.config().max_upload_bytes;
    let bytes = axum::body::to_bytes(body, limit.saturating_add(1))
        .await
        .map_err(|_| {
            ApiError::validation(format!("upload exceeds the {limit}-byte limit"))
                .with_details(json!({ "limit": limit }))
        })?;
    let name = q.get("name").map(String::as_str).unwrap_or("upload.pdf");
    let info = app.upload_document(&bytes, name)?;
    Ok((StatusCode::CREATED, Json(info)).into_response())
}

async fn budget(State(app): State<Arc<App>>) -> Result<Response, ApiError> {
    Ok(Json(app.budget()?).into_response())
}
