#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use txt2vid_backend::conformance::test_profile;
use txt2vid_core::text::{CompressorId, SegmentationStrategy, Transcript};
use txt2vid_core::wire::{Frame, FrameDecoder, MessageType, SessionProfile};
use txt2vid_gateway::{Gateway, GatewayConfig, Session, SessionState};

pub const USER: u16 = 7;
pub const TIMEOUT: Duration = Duration::from_secs(30);

pub fn config(dir: &Path) -> GatewayConfig {
    GatewayConfig {
        muxer: false,
        stats_interval_ms: 200,
        ui_frame_every: 1,
        ..GatewayConfig::ephemeral(dir.join("profiles"))
    }
}

pub async fn start(dir: &Path) -> Gateway {
    Gateway::start(config(dir)).await.expect("gateway starts")
}

pub fn profile() -> SessionProfile {
    SessionProfile {
        user_id: USER,
        voice_profile_ref: "voice-7".into(),
        container_tag: *b"RAWV",
        driving_video: test_profile(),
    }
}

/// Short transcript spread over `ms` of speech.
pub fn transcript(ms: u64) -> Transcript {
    txt2vid_core::text::segment_transcript(
        "Hello there. This is a short test. It has three sentences.",
        SegmentationStrategy::Sentence,
    )
    .with_nominal_duration(ms)
}

/// HELLO, REGISTER_PROFILE (when `register`), segments, SESSION_END.
pub fn trace(session_id: u32, ms: u64, register: bool) -> Vec<Frame> {
    let p = profile();
    transcript(ms).to_trace(session_id, USER, CompressorId::Bzip2, register.then_some(&p))
}

pub struct WireClient {
    stream: TcpStream,
    decoder: FrameDecoder,
}

impl WireClient {
    pub async fn connect(addr: SocketAddr) -> Self {
        Self {
            stream: TcpStream::connect(addr).await.expect("connect"),
            decoder: FrameDecoder::new(),
        }
    }

    pub async fn send(&mut self, frame: &Frame) {
        self.stream.write_all(&frame.encode().unwrap()).await.unwrap();
    }

    pub async fn send_raw(&mut self, bytes: &[u8]) {
        self.stream.write_all(bytes).await.unwrap();
    }

    /// Next frame, or None on EOF.
    pub async fn recv(&mut self) -> Option<Frame> {
        let mut buf = [0u8; 4096];
        loop {
            if let Some(f) = self.decoder.next_frame().expect("server sends valid frames") {
                return Some(f);
            }
            let n = tokio::time::timeout(TIMEOUT, self.stream.read(&mut buf))
                .await
                .expect("reply in time")
                .ok()?;
            if n == 0 {
                return None;
            }
            self.decoder.extend(&buf[..n]);
        }
    }

    pub async fn expect(&mut self, t: MessageType) -> Frame {
        let f = self.recv().await.unwrap_or_else(|| panic!("connection closed, wanted {t}"));
        assert_eq!(f.msg_type, t, "payload {:?}", String::from_utf8_lossy(&f.payload));
        f
    }

    /// Sends a whole sender trace, checking the acks the receiver owes.
    pub async fn run(&mut self, trace: &[Frame]) {
        for f in trace {
            self.send(f).await;
            match f.msg_type {
                MessageType::Hello => {
                    self.expect(MessageType::HelloAck).await;
                }
                MessageType::RegisterProfile => {
                    self.expect(MessageType::ProfileAck).await;
                }
                _ => {}
            }
        }
    }
}

pub async fn wait_done(gw: &Gateway, id: u32) -> Arc<Session> {
    let deadline = Instant::now() + TIMEOUT;
    loop {
        if let Some(s) = gw.hub.session(id) {
            if s.state().is_done() {
                return s;
            }
        }
        assert!(Instant::now() < deadline, "session {id} did not finish");
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

pub fn assert_finished(s: &Arc<Session>) {
    assert_eq!(s.state(), SessionState::Finished, "session {}", s.id);
}
