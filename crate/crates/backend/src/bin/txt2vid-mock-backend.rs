use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::Context;
use clap::Parser;
use tracing::info;
use txt2vid_backend::{serve_backend, serve_tcp, ServeOptions};
use txt2vid_core::synth::{MockBackend, MockVoiceModel};

/// Deterministic procedural TTS + lip-sync backend.
///
/// Speaks newline-delimited JSON on stdin/stdout, or on a TCP port with
/// `--listen`. Logs go to stderr.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    /// Serve TCP on this address instead of stdio.
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Answer with a `timeout` error when a request takes longer.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Mock speaking rate in characters per second.
    #[arg(long, default_value_t = 15.0)]
    speaking_rate: f64,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let args = Args::parse();
    anyhow::ensure!(args.speaking_rate > 0.0, "--speaking-rate must be positive");
    let backend = Arc::new(Mutex::new(MockBackend::new(MockVoiceModel {
        speaking_rate: args.speaking_rate,
        ..MockVoiceModel::default()
    })));
    let opts = ServeOptions {
        request_timeout: args.timeout_ms.map(Duration::from_millis),
    };
    match args.listen {
        Some(addr) => {
            let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
            // Tests bind port 0 and read the real address from this line.
            println!("listening {}", listener.local_addr()?);
            serve_tcp(listener, backend, opts).await?;
        }
        None => {
            let summary = serve_backend(tokio::io::stdin(), tokio::io::stdout(), backend, &opts).await?;
            info!(requests = summary.requests, errors = summary.errors, "done");
        }
    }
    Ok(())
}
