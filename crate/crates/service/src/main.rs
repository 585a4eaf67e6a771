use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mitigator_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "mitigator-service",
    version,
    about = "Live session service for the mitigation policy engine"
)]
struct Args {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8750")]
    bind: SocketAddr,
    /// Directory for per-session JSONL journals.
    #[arg(long)]
    journal: Option<PathBuf>,
    /// Let wizard overrides consume the current policy step by default.
    #[arg(long)]
    overrides_advance_ladder: bool,
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let args = Args::parse();
    if let Some(dir) = &args.journal {
        if let Err(e) = std::fs::create_dir_all(dir) {
            tracing::error!("cannot create journal directory {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    let state = AppState::new(ServiceConfig {
        journal_dir: args.journal,
        overrides_advance_ladder: args.overrides_advance_ladder,
    });
    let listener = match tokio::net::TcpListener::bind(args.bind).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!("cannot bind {}: {e}", args.bind);
            return ExitCode::from(2);
        }
    };
    tracing::info!("listening on {}", args.bind);
    if let Err(e) = axum::serve(listener, router(state)).await {
        tracing::error!("server error: {e}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
