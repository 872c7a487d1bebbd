#![allow(dead_code)]

use std::path::Path;
use std::time::{Duration, Instant};

use txt2vid_core::api::SessionInfo;
use txt2vid_gateway::{Gateway, GatewayConfig};

/// A gateway on its own runtime, for blocking clients.
pub struct Running {
    pub gateway: Gateway,
    _rt: tokio::runtime::Runtime,
}

impl Running {
    pub fn start(dir: &Path) -> Self {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let config = GatewayConfig {
            muxer: false,
            ..GatewayConfig::ephemeral(dir.join("profiles"))
        };
        let gateway = rt.block_on(Gateway::start(config)).unwrap();
        Self { gateway, _rt: rt }
    }

    pub fn http(&self) -> String {
        format!("http://{}", self.gateway.http_addr)
    }
}

pub fn wait_done(client: &txt2vid_client::GatewayClient, id: u32) -> SessionInfo {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        if let Ok(s) = client.session(id) {
            if s.state.is_done() {
                return s;
            }
        }
        assert!(Instant::now() < deadline, "session {id} did not finish");
        std::thread::sleep(Duration::from_millis(20));
    }
}

pub const TEXT: &str = "We choose to go to the moon. We choose to go in this decade! Why, some say, the moon?";
