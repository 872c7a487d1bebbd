//! Receiver service: accepts wire-protocol sessions over TCP and websocket,
//! runs each through the synthesis pipeline and serves the result to UI
//! clients and playback viewers.

pub mod config;
pub mod http;
pub mod profiles;
pub mod session;
pub mod ui;
pub mod wire;

use std::net::SocketAddr;
use std::sync::Arc;

use anyhow::Context;
use tokio::net::TcpListener;
use tokio::sync::watch;
use tokio::task::JoinSet;
use tracing::{info, warn};
use txt2vid_core::media::mux::locate_ffmpeg;

pub use config::GatewayConfig;
pub use profiles::{ProfileEntry, ProfileStore};
pub use session::{Hub, Session, SessionInfo, SessionState, Stats};

/// A running gateway.
pub struct Gateway {
    pub wire_addr: SocketAddr,
    pub ui_addr: SocketAddr,
    pub http_addr: SocketAddr,
    pub hub: Arc<Hub>,
    shutdown: watch::Sender<bool>,
    tasks: JoinSet<()>,
}

impl Gateway {
    /// Binds all listeners and starts serving on the current runtime.
    pub async fn start(config: GatewayConfig) -> anyhow::Result<Self> {
        config.validate().map_err(anyhow::Error::msg)?;
        let store = ProfileStore::open(&config.profile_dir)?;
        let ffmpeg = config.muxer.then(|| locate_ffmpeg(config.ffmpeg.as_deref())).flatten();
        if config.muxer && ffmpeg.is_none() {
            warn!("no transcoder found; playback streams are disabled");
        }
        let wire = TcpListener::bind(config.wire_addr).await.with_context(|| format!("binding {}", config.wire_addr))?;
        let ui = TcpListener::bind(config.ui_addr).await.with_context(|| format!("binding {}", config.ui_addr))?;
        let http = TcpListener::bind(config.http_addr).await.with_context(|| format!("binding {}", config.http_addr))?;
        let (wire_addr, ui_addr, http_addr) = (wire.local_addr()?, ui.local_addr()?, http.local_addr()?);
        let hub = Arc::new(Hub::new(config, store, ffmpeg));
        let (shutdown, rx) = watch::channel(false);
        let mut tasks = JoinSet::new();
        tasks.spawn(until(rx.clone(), wire::serve_tcp(wire, hub.clone())));
        tasks.spawn(until(rx.clone(), serve_router(ui, http::ws_router(hub.clone()))));
        tasks.spawn(until(rx, serve_router(http, http::api_router(hub.clone()))));
        info!(%wire_addr, %ui_addr, %http_addr, playback = hub.muxer_available(), "gateway listening");
        Ok(Self {
            wire_addr,
            ui_addr,
            http_addr,
            hub,
            shutdown,
            tasks,
        })
    }

    /// Stops accepting connections. Sessions already running finish on
    /// their own threads.
    pub async fn stop(mut self) {
        let _ = self.shutdown.send(true);
        while self.tasks.join_next().await.is_some() {}
    }

    /// Serves until ctrl-c.
    pub async fn run_until_ctrl_c(self) -> anyhow::Result<()> {
        tokio::signal::ctrl_c().await?;
        info!("shutting down");
        self.stop().await;
        Ok(())
    }
}

async fn serve_router(listener: TcpListener, router: axum::Router) {
    if let Err(e) = axum::serve(listener, router).await {
        warn!("listener stopped: {e}");
    }
}

async fn until(mut stop: watch::Receiver<bool>, fut: impl std::future::Future<Output = ()>) {
    tokio::select! {
        _ = fut => {}
        _ = stop.wait_for(|s| *s) => {}
    }
}
