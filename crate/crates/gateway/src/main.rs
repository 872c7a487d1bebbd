use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;
use txt2vid_gateway::{Gateway, GatewayConfig};

/// txt2vid receiver gateway.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML config file; defaults apply to everything it leaves out.
    #[arg(short, long, env = "TXT2VID_GATEWAY_CONFIG")]
    config: Option<PathBuf>,
    /// Overrides `profile_dir`.
    #[arg(long)]
    profile_dir: Option<PathBuf>,
    /// Disable the playback muxer.
    #[arg(long)]
    no_muxer: bool,
    /// Print the effective config and exit.
    #[arg(long)]
    print_config: bool,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .json()
        .with_current_span(false)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(p) => GatewayConfig::load(p)?,
        None => GatewayConfig::default(),
    };
    if let Some(dir) = args.profile_dir {
        config.profile_dir = dir;
    }
    if args.no_muxer {
        config.muxer = false;
    }
    if args.print_config {
        println!("{}", toml::to_string_pretty(&config).context("serializing config")?);
        return Ok(());
    }
    let gateway = Gateway::start(config).await?;
    gateway.run_until_ctrl_c().await
}
