//! Browser UI websocket.
//!
//! JSON messages tagged by `type`. A client without `?session=` owns a new
//! session and types into it; with `?session=<id>` it watches an existing
//! one and may only receive.

use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket};
use serde::{Deserialize, Serialize};
use tokio::sync::broadcast::error::RecvError;
use tracing::{debug, info};
use txt2vid_core::media::Mode;
use txt2vid_core::text::CompressorId;
use txt2vid_core::wire::TextSegmentPayload;

use crate::session::{Hub, Session, SessionDriver, SessionState, Stats, UiEvent};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMsg {
    Text { body: String },
    SelectProfile { user_id: u16 },
    Mode { value: Mode },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMsg {
    /// First message on every connection.
    Session { id: u32, mode: Mode, owner: bool },
    Stats {
        bps_payload: f64,
        bps_wire: f64,
        latency_ms: Option<u64>,
    },
    Frame { index: u64, pts_ms: u64, jpeg_b64: String },
    TranscriptEcho { seq: u32, text: String },
    Error { message: String },
    Ended {
        #[serde(flatten)]
        state: SessionState,
    },
}

impl ServerMsg {
    fn stats(s: &Stats) -> Self {
        ServerMsg::Stats {
            bps_payload: s.bps_payload,
            bps_wire: s.bps_wire,
            latency_ms: s.latency_ms,
        }
    }

    fn error(message: impl Into<String>) -> Self {
        ServerMsg::Error { message: message.into() }
    }
}

impl From<UiEvent> for ServerMsg {
    fn from(e: UiEvent) -> Self {
        match e {
            UiEvent::Echo { seq, text } => ServerMsg::TranscriptEcho { seq, text },
            UiEvent::Frame { index, pts_ms, jpeg_b64 } => ServerMsg::Frame { index, pts_ms, jpeg_b64 },
            UiEvent::Ended { state } => ServerMsg::Ended { state },
        }
    }
}

/// The typing side of an owned session.
struct Typist {
    driver: SessionDriver,
    profile: Option<u16>,
    next_seq: u32,
}

impl Typist {
    fn handle(&mut self, hub: &Arc<Hub>, session: &Arc<Session>, msg: ClientMsg) -> Option<ServerMsg> {
        match msg {
            ClientMsg::SelectProfile { user_id } => {
                if !self.driver.learn_profile(user_id) {
                    return Some(ServerMsg::error("unknown profile"));
                }
                self.profile = Some(user_id);
                None
            }
            ClientMsg::Mode { value } => session.set_mode(value).err().map(ServerMsg::error),
            ClientMsg::Text { body } => {
                let Some(user) = self.profile else {
                    return Some(ServerMsg::error("select a profile first"));
                };
                if body.trim().is_empty() {
                    return Some(ServerMsg::error("text is empty"));
                }
                if session.state() != SessionState::Open {
                    return Some(ServerMsg::error("session has ended"));
                }
                hub.start_pipeline(session);
                let seg = TextSegmentPayload::from_text(
                    session.id,
                    self.next_seq,
                    session.elapsed_ms(),
                    user,
                    CompressorId::Bzip2,
                    &body,
                );
                self.next_seq += 1;
                let out = self.driver.handle(&seg.to_frame());
                if out.close {
                    return Some(ServerMsg::error("segment rejected"));
                }
                None
            }
        }
    }
}

async fn send(socket: &mut WebSocket, msg: &ServerMsg) -> bool {
    let text = serde_json::to_string(msg).expect("serializable");
    socket.send(Message::Text(text.into())).await.is_ok()
}

/// Runs one UI connection. `watch` attaches to an existing session.
pub async fn handle(mut socket: WebSocket, hub: Arc<Hub>, watch: Option<u32>) {
    let (session, mut typist) = match watch {
        Some(id) => match hub.session(id) {
            Some(s) => (s, None),
            None => {
                let _ = send(&mut socket, &ServerMsg::error(format!("unknown session {id}"))).await;
                return;
            }
        },
        None => {
            let driver = SessionDriver::ui(hub.clone());
            let Some(s) = driver.session().cloned() else {
                let _ = send(&mut socket, &ServerMsg::error("cannot open a session")).await;
                return;
            };
            (
                s,
                Some(Typist {
                    driver,
                    profile: None,
                    next_seq: 0,
                }),
            )
        }
    };
    info!(session = session.id, owner = typist.is_some(), "ui connected");
    let hello = ServerMsg::Session {
        id: session.id,
        mode: session.mode(),
        owner: typist.is_some(),
    };
    if !send(&mut socket, &hello).await {
        return;
    }
    let mut events = session.subscribe();
    let mut events_open = true;
    let mut tick = tokio::time::interval(Duration::from_millis(hub.config.stats_interval_ms));
    loop {
        let reply = tokio::select! {
            msg = socket.recv() => match msg {
                Some(Ok(Message::Text(text))) => match serde_json::from_str::<ClientMsg>(&text) {
                    Ok(m) => match typist.as_mut() {
                        Some(t) => t.handle(&hub, &session, m),
                        None => Some(ServerMsg::error("watching clients cannot send")),
                    },
                    Err(e) => Some(ServerMsg::error(format!("bad message: {e}"))),
                },
                Some(Ok(Message::Binary(_))) => Some(ServerMsg::error("binary messages are not accepted here")),
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => None,
            },
            _ = tick.tick() => Some(ServerMsg::stats(&session.stats())),
            ev = events.recv(), if events_open => match ev {
                Ok(e) => Some(e.into()),
                Err(RecvError::Lagged(n)) => {
                    debug!(session = session.id, skipped = n, "ui client lagging");
                    None
                }
                Err(RecvError::Closed) => {
                    events_open = false;
                    None
                }
            },
        };
        if let Some(r) = reply {
            if !send(&mut socket, &r).await {
                break;
            }
        }
    }
    if let Some(mut t) = typist {
        t.driver.end();
    }
    info!(session = session.id, "ui disconnected");
}
