use std::process::ExitCode;
use std::sync::Arc;

use chatisa_server::app::App;
use chatisa_server::cli::{self, Cli, Command};
use chatisa_server::error::ApiError;
use clap::Parser;

fn report(e: &ApiError) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": e }));
    ExitCode::FAILURE
}

#[tokio::main]
async fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = match cli::load_config(&cli) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let app = match App::open(config, &cli.data_dir) {
        Ok(a) => Arc::new(a),
        Err(e) => return report(&e),
    };
    match cli.command {
        Command::Serve { bind } => match cli::serve(app, &bind).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e:#}");
                ExitCode::FAILURE
            }
        },
        command => {
            let mut out = std::io::stdout();
            match cli::run_command(&app, command, &mut out).await {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => report(&e),
            }
        }
    }
}
