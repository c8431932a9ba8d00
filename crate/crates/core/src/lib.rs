//! Core of the ChatISA tutoring service: provider gateway, prompt library,
//! conversation engine, PDF ingestion and transcript export.

pub mod clock;
pub mod config;
pub mod conversation;
pub mod export;
pub mod fonts;
pub mod gateway;
pub mod ingest;
pub mod money;
pub mod pdfgen;
pub mod prompts;
