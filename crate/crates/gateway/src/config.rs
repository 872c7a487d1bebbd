use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use txt2vid_backend::BackendSpec;
use txt2vid_core::media::Mode;

/// Gateway settings, read from a TOML file. Every field has a default.
///
/// ```toml
/// wire_addr = "127.0.0.1:7400"
/// ui_addr = "127.0.0.1:7401"
/// http_addr = "127.0.0.1:7402"
/// mode = "live"
/// profile_dir = "profiles"
/// ui_token = "change-me"
///
/// [backend]
/// transport = "stdio"
/// program = "txt2vid-mock-backend"
/// args = []
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    /// Wire protocol over plain TCP.
    pub wire_addr: SocketAddr,
    /// UI websocket (`/ui`) and wire protocol over websocket (`/wire`).
    pub ui_addr: SocketAddr,
    /// Playback streams and the JSON API.
    pub http_addr: SocketAddr,
    pub backend: BackendSpec,
    /// Mode of new sessions. UI sessions may change it before their first
    /// text.
    pub mode: Mode,
    pub profile_dir: PathBuf,
    /// Shared secret the UI passes as `?token=`.
    pub ui_token: String,
    /// Run the external muxer for `/session/<id>/stream`.
    pub muxer: bool,
    /// Transcoder binary; searched for when unset.
    pub ffmpeg: Option<PathBuf>,
    /// UI stats push period; at most 1000.
    pub stats_interval_ms: u64,
    /// Send every n-th synthesized frame to UI clients as JPEG; 0 disables.
    pub ui_frame_every: u32,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            wire_addr: ([127, 0, 0, 1], 7400).into(),
            ui_addr: ([127, 0, 0, 1], 7401).into(),
            http_addr: ([127, 0, 0, 1], 7402).into(),
            backend: BackendSpec::InProcess,
            mode: Mode::Live,
            profile_dir: PathBuf::from("profiles"),
            ui_token: "txt2vid".into(),
            muxer: true,
            ffmpeg: None,
            stats_interval_ms: 500,
            ui_frame_every: 5,
        }
    }
}

impl GatewayConfig {
    pub fn from_toml(s: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(s)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(Self::from_toml(&text)?)
    }

    /// Settings for tests and embedding: all listeners on ephemeral
    /// localhost ports, in-process mock backend.
    pub fn ephemeral(profile_dir: impl Into<PathBuf>) -> Self {
        let any: SocketAddr = ([127, 0, 0, 1], 0).into();
        Self {
            wire_addr: any,
            ui_addr: any,
            http_addr: any,
            profile_dir: profile_dir.into(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fixed: Vec<SocketAddr> = [self.wire_addr, self.ui_addr, self.http_addr]
            .into_iter()
            .filter(|a| a.port() != 0)
            .collect();
        for (i, a) in fixed.iter().enumerate() {
            if fixed[i + 1..].contains(a) {
                return Err(format!("listen address {a} is used twice"));
            }
        }
        if self.ui_token.is_empty() {
            return Err("ui_token must not be empty".into());
        }
        if self.stats_interval_ms == 0 || self.stats_interval_ms > 1000 {
            return Err(format!("stats_interval_ms {} must be in 1..=1000", self.stats_interval_ms));
        }
        Ok(())
    }
}
