#![allow(dead_code)]

use std::sync::Arc;

use chatisa_core::clock::{SequentialIds, SteppingClock};
use chatisa_core::config::ServiceConfig;
use chatisa_core::conversation::{Engine, MemoryStore, SessionManager};
use chatisa_core::gateway::{Gateway, MockAdapter, MockScript, Provider, Registry, RetryPolicy};
use chatisa_core::prompts::PromptLibrary;
use chrono::{DateTime, Duration};

pub const RESERVED: u32 = 1024;

pub fn seed_registry() -> Registry {
    ServiceConfig::seed().registry().unwrap()
}

pub fn gateway(mock: &Arc<MockAdapter>, registry: Registry) -> Gateway {
    let mut b = Gateway::builder(registry).retry(RetryPolicy {
        max_retries: 2,
        base_backoff: std::time::Duration::ZERO,
    });
    for p in Provider::ALL {
        b = b.adapter_for(p, mock.clone());
    }
    b.build()
}

pub fn engine(mock: &Arc<MockAdapter>) -> Engine {
    Engine::new(
        Arc::new(gateway(mock, seed_registry())),
        Arc::new(PromptLibrary::builtin()),
        Arc::new(SteppingClock::new(
            DateTime::from_timestamp(1_746_057_600, 0).unwrap(),
            Duration::seconds(1),
        )),
        Arc::new(SequentialIds::new("s")),
        RESERVED,
    )
}

pub fn manager() -> (SessionManager, Arc<MockAdapter>) {
    let mock = Arc::new(MockAdapter::new(MockScript::default()));
    let m = SessionManager::new(engine(&mock), Arc::new(MemoryStore::new()));
    (m, mock)
}
