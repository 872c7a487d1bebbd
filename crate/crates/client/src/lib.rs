//! Client side of the txt2vid gateway: the JSON API over HTTP and a
//! blocking sender for the wire protocol.

mod sender;

pub use sender::{send_session, SendError, SendOptions};

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use txt2vid_core::api::{
    BitrateRequest, BitrateResponse, ProfileEntry, RatiosRequest, SessionInfo, StudyRequest, StudyResponse,
};
use txt2vid_core::bench::MatrixRow;

pub const DEFAULT_GATEWAY: &str = "http://127.0.0.1:7402";

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("gateway request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("gateway answered {status}: {message}")]
    Api { status: u16, message: String },
}

/// Blocking client for the gateway's HTTP API.
#[derive(Debug, Clone)]
pub struct GatewayClient {
    base: String,
    http: reqwest::blocking::Client,
}

impl GatewayClient {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    pub fn health(&self) -> Result<(), ClientError> {
        let resp = self.http.get(format!("{}/healthz", self.base)).send()?;
        check(resp).map(drop)
    }

    pub fn sessions(&self) -> Result<Vec<SessionInfo>, ClientError> {
        self.get("/api/sessions")
    }

    pub fn session(&self, id: u32) -> Result<SessionInfo, ClientError> {
        self.get(&format!("/api/sessions/{id}"))
    }

    pub fn profiles(&self) -> Result<Vec<ProfileEntry>, ClientError> {
        self.get("/api/profiles")
    }

    pub fn bitrate(&self, req: &BitrateRequest) -> Result<BitrateResponse, ClientError> {
        self.post("/api/bitrate", req)
    }

    pub fn ratios(&self, rows: Vec<MatrixRow>, txt2vid_bps: f64) -> Result<Vec<MatrixRow>, ClientError> {
        self.post("/api/ratios", &RatiosRequest { rows, txt2vid_bps })
    }

    pub fn study(&self, req: &StudyRequest) -> Result<StudyResponse, ClientError> {
        self.post("/api/study", req)
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, ClientError> {
        let resp = self.http.get(format!("{}{path}", self.base)).send()?;
        Ok(check(resp)?.json()?)
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, ClientError> {
        let resp = self.http.post(format!("{}{path}", self.base)).json(body).send()?;
        Ok(check(resp)?.json()?)
    }
}

fn check(resp: reqwest::blocking::Response) -> Result<reqwest::blocking::Response, ClientError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let text = resp.text().unwrap_or_default();
    let message = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v["error"].as_str().map(str::to_string))
        .unwrap_or(text);
    Err(ClientError::Api {
        status: status.as_u16(),
        message,
    })
}
