#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use chatisa_core::clock::{SequentialIds, SteppingClock};
use chatisa_core::config::ServiceConfig;
use chatisa_core::conversation::MemoryStore;
use chatisa_core::gateway::{Gateway, MockAdapter, MockScript, Provider, RetryPolicy};
use chatisa_server::api::router;
use chatisa_server::app::App;
use chrono::{DateTime, Duration};
use serde_json::Value;
use tower::ServiceExt;

pub const START: i64 = 1_746_057_600;

pub struct Harness {
    pub app: Arc<App>,
    pub mock: Arc<MockAdapter>,
    pub router: Router,
    _docs: tempfile::TempDir,
}

pub fn harness() -> Harness {
    harness_with(ServiceConfig::seed(), MockScript::default())
}

pub fn harness_with(config: ServiceConfig, script: MockScript) -> Harness {
    let mock = Arc::new(MockAdapter::new(script));
    let mut b = Gateway::builder(config.registry().unwrap()).retry(RetryPolicy {
        max_retries: 2,
        base_backoff: std::time::Duration::ZERO,
    });
    for p in Provider::ALL {
        b = b.adapter_for(p, mock.clone());
    }
    let docs = tempfile::tempdir().unwrap();
    let app = App::new(
        config,
        b.build(),
        Arc::new(MemoryStore::new()),
        docs.path(),
        Arc::new(SteppingClock::new(
            DateTime::from_timestamp(START, 0).unwrap(),
            Duration::seconds(1),
        )),
        Arc::new(SequentialIds::new("s")),
    )
    .unwrap();
    let app = Arc::new(app);
    Harness {
        router: router(app.clone()),
        app,
        mock,
        _docs: docs,
    }
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub bytes: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes)
            .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.bytes)))
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes).into_owned()
    }

    /// Parsed NDJSON lines.
    pub fn events(&self) -> Vec<Value> {
        self.text()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    pub fn error_code(&self) -> Option<String> {
        let v: Value = serde_json::from_slice(&self.bytes).ok()?;
        v["error"]["code"].as_str().map(str::to_string)
    }
}

pub async fn send(router: &Router, method: &str, uri: &str, body: Body, ctype: &str) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", ctype)
        .body(body)
        .unwrap();
    let resp = router.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    Reply {
        status,
        content_type,
        bytes,
    }
}

pub async fn get(router: &Router, uri: &str) -> Reply {
    send(router, "GET", uri, Body::empty(), "application/json").await
}

pub async fn post_json(router: &Router, uri: &str, body: Value) -> Reply {
    send(
        router,
        "POST",
        uri,
        Body::from(body.to_string()),
        "application/json",
    )
    .await
}

pub async fn post_bytes(router: &Router, uri: &str, bytes: Vec<u8>) -> Reply {
    send(router, "POST", uri, Body::from(bytes), "application/pdf").await
}
