use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chatisa_core::config::ServiceConfig;
use chatisa_core::money::Money;
use chatisa_core::prompts::TemplateId;
use clap::{Parser, Subcommand};
use serde::Serialize;
use tokio::sync::mpsc;

use crate::app::{App, CreateSession};
use crate::error::{ApiError, ErrorCode};

#[derive(Debug, Parser)]
#[command(name = "chatisa", version, about = "Tutoring chatbot service")]
pub struct Cli {
    /// Service configuration (TOML). The shipped seed registry when omitted.
    #[arg(long, env = "CHATISA_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, env = "DATA_DIR", default_value = "./data", global = true)]
    pub data_dir: PathBuf,
    /// Serve every provider from this mock reply script.
    #[arg(long, global = true)]
    pub mock_script: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = "BIND_ADDR", default_value = "127.0.0.1:8080")]
        bind: String,
    },
    /// List models, optionally only those a module may use.
    Models {
        #[arg(long)]
        module: Option<String>,
    },
    NewSession {
        #[arg(long)]
        module: String,
        #[arg(long)]
        model: String,
        #[arg(long)]
        template: Option<String>,
        /// NAME=VALUE prompt binding; repeatable.
        #[arg(long = "bind", value_parser = parse_pair)]
        bindings: Vec<(String, String)>,
        /// PLACEHOLDER=DOCUMENT_ID from `upload`; repeatable.
        #[arg(long = "document", value_parser = parse_pair)]
        documents: Vec<(String, String)>,
    },
    /// Post one user message and print the reply.
    Say {
        session: String,
        text: String,
        /// Print chunks to stderr as they arrive.
        #[arg(long)]
        stream: bool,
    },
    SwitchModel {
        session: String,
        model: String,
    },
    Show {
        session: String,
    },
    /// Print the session's persisted records.
    Records {
        session: String,
    },
    Upload {
        path: PathBuf,
    },
    Export {
        session: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        course: String,
        #[arg(long, short)]
        out: PathBuf,
    },
    Budget,
}

fn parse_pair(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))
}

/// Loads the configuration and applies environment and flag overrides.
pub fn load_config(cli: &Cli) -> Result<ServiceConfig, ApiError> {
    let mut cfg = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::seed(),
    };
    if let Ok(v) = std::env::var("MONTHLY_BUDGET") {
        let m: Money = v
            .parse()
            .map_err(|e| ApiError::new(ErrorCode::Config, format!("MONTHLY_BUDGET: {e}")))?;
        if m <= Money::ZERO {
            return Err(ApiError::new(
                ErrorCode::Config,
                "MONTHLY_BUDGET must be positive",
            ));
        }
        cfg.monthly_budget = Some(m);
    }
    if let Some(s) = &cli.mock_script {
        cfg.mock_script = Some(s.clone());
    }
    Ok(cfg)
}

fn print_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), ApiError> {
    let s = serde_json::to_string_pretty(v).expect("serializable");
    writeln!(out, "{s}").map_err(io_err)
}

fn io_err(e: std::io::Error) -> ApiError {
    ApiError::new(ErrorCode::Config, e.to_string())
}

/// Runs one non-serving command against `app`, writing JSON to `out`.
pub async fn run_command(app: &App, command: Command, out: &mut dyn Write) -> Result<(), ApiError> {
    match command {
        Command::Serve { .. } => Err(ApiError::validation("serve is handled by the binary")),
        Command::Models { module } => print_json(out, &app.list_models(module.as_deref())?),
        Command::NewSession {
            module,
            model,
            template,
            bindings,
            documents,
        } => {
            let template = template.map(|t| t.parse::<TemplateId>()).transpose()?;
            let view = app.create_session(CreateSession {
                module,
                model_id: model,
                template,
                bindings: bindings.into_iter().collect::<BTreeMap<_, _>>(),
                documents: documents.into_iter().collect(),
                student_label: None,
            })?;
            print_json(out, &view)
        }
        Command::Say {
            session,
            text,
            stream,
        } => {
            let reply = if stream {
                let (tx, mut rx) = mpsc::unbounded_channel::<String>();
                let printer = tokio::spawn(async move {
                    let mut err = std::io::stderr();
                    while let Some(c) = rx.recv().await {
                        let _ = err.write_all(c.as_bytes());
                        let _ = err.flush();
                    }
                    let _ = writeln!(err);
                });
                let r = app.post_message(&session, &text, Some(&tx)).await;
                drop(tx);
                let _ = printer.await;
                r?
            } else {
                app.post_message(&session, &text, None).await?
            };
            print_json(out, &reply)
        }
        Command::SwitchModel { session, model } => {
            print_json(out, &app.switch_model(&session, &model).await?)
        }
        Command::Show { session } => print_json(out, &app.get_session(&session).await?),
        Command::Records { session } => {
            let raw = app.manager().raw_records(&session)?;
            out.write_all(raw.as_bytes()).map_err(io_err)
        }
        Command::Upload { path } => {
            let bytes = std::fs::read(&path)
                .map_err(|e| ApiError::validation(format!("{}: {e}", path.display())))?;
            let name = file_name(&path);
            print_json(out, &app.upload_document(&bytes, &name)?)
        }
        Command::Export {
            session,
            name,
            course,
            out: path,
        } => {
            let (title, pdf) = app.export_pdf(&session, &name, &course).await?;
            std::fs::write(&path, &pdf).map_err(io_err)?;
            print_json(
                out,
                &serde_json::json!({ "title": title, "path": path, "bytes": pdf.len() }),
            )
        }
        Command::Budget => print_json(out, &app.budget()?),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "upload.pdf".into())
}

pub async fn serve(app: Arc<App>, bind: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, crate::api::router(app)).await?;
    Ok(())
}
