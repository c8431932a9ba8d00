//! HTTP API and command-line front end over the tutoring core.

pub mod api;
pub mod app;
pub mod cli;
pub mod error;
