use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use hiervis_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(name = "hiervis-serve", version, about = "Serve interactive recommendation sessions over HTTP")]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Seconds of inactivity before a session is dropped.
    #[arg(long, default_value_t = 3600)]
    idle_timeout: u64,
    /// Append-only JSON-lines log of session events.
    #[arg(long)]
    event_log: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let state = AppState::new(ServiceConfig {
        idle_timeout: Duration::from_secs(args.idle_timeout),
        event_log: args.event_log,
    })?;
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.expire_idle();
        }
    });
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
