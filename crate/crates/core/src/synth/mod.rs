//! Synthesis backends: the TTS + lip-sync contract the receiver pipeline
//! drives, the JSON-lines protocol types used to reach an out-of-process
//! backend, and a deterministic procedural mock.

mod mock;
mod profile;
pub mod protocol;

pub use mock::{mock_lipsync, mock_tts, MockBackend, MockVoiceModel, SINE_QUARTER};
pub use profile::{decode_driving_video, encode_raw_video, DrivingProfile, RAW_VIDEO_TAG};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::media::{Clock, PcmAudio, VideoFrame};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("text is empty")]
    EmptyText,
    #[error("audio of {0} ms is shorter than the 200 ms floor")]
    AudioTooShort(u64),
    #[error("driving profile has no frames")]
    EmptyProfile,
    #[error("unknown profile {0}")]
    UnknownProfile(u16),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("unsupported operation {0}")]
    Unsupported(String),
    #[error("backend transport: {0}")]
    Transport(String),
    #[error("backend error {code}: {message}")]
    Remote { code: String, message: String },
}

impl BackendError {
    /// Protocol error code.
    pub fn code(&self) -> &str {
        match self {
            BackendError::EmptyText => "empty_text",
            BackendError::AudioTooShort(_) => "audio_too_short",
            BackendError::EmptyProfile => "empty_profile",
            BackendError::UnknownProfile(_) => "unknown_profile",
            BackendError::BadRequest(_) => "bad_request",
            BackendError::Unsupported(_) => "unsupported",
            BackendError::Transport(_) => "transport",
            BackendError::Remote { code, .. } => code,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub ops: Vec<String>,
    pub max_chunk_ms: u32,
    /// Reserved for a length-prefixed binary media lane; always false today.
    #[serde(default)]
    pub binary: bool,
}

/// What the receiver pipeline needs from a TTS + lip-sync implementation.
pub trait SynthesisBackend: Send {
    fn capabilities(&self) -> Capabilities;

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError>;

    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError>;

    /// `start_frame` is the index of the first output frame on the session
    /// timeline, so driving-video looping stays continuous across chunks.
    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError>;
}

impl<B: SynthesisBackend + ?Sized> SynthesisBackend for Box<B> {
    fn capabilities(&self) -> Capabilities {
        (**self).capabilities()
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        (**self).register_profile(profile_id, container_tag, driving_video)
    }

    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        (**self).tts(voice_id, text)
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        (**self).lipsync(profile_id, audio, fps, start_frame)
    }
}

/// Charges a fixed latency per call against a clock. With a
/// [`crate::media::SimClock`] this makes latency tests exact.
pub struct TimedBackend<B> {
    inner: B,
    clock: Arc<dyn Clock>,
    tts_ms: u64,
    lipsync_ms: u64,
}

impl<B: SynthesisBackend> TimedBackend<B> {
    pub fn new(inner: B, clock: Arc<dyn Clock>, tts_ms: u64, lipsync_ms: u64) -> Self {
        Self {
            inner,
            clock,
            tts_ms,
            lipsync_ms,
        }
    }

    pub fn inner_mut(&mut self) -> &mut B {
        &mut self.inner
    }
}

impl<B: SynthesisBackend> SynthesisBackend for TimedBackend<B> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        self.inner.register_profile(profile_id, container_tag, driving_video)
    }

    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        self.clock.sleep_for(self.tts_ms);
        self.inner.tts(voice_id, text)
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        self.clock.sleep_for(self.lipsync_ms);
        self.inner.lipsync(profile_id, audio, fps, start_frame)
    }
}

/// Fails chosen calls; for fault-injection tests.
pub struct FaultyBackend<B> {
    inner: B,
    calls: u64,
    fail_lipsync_calls: Vec<u64>,
    fail_tts_calls: Vec<u64>,
    tts_calls: u64,
}

impl<B: SynthesisBackend> FaultyBackend<B> {
    /// Lip-sync calls (0-based, counted across the session) listed in
    /// `fail_lipsync_calls` return an error.
    pub fn new(inner: B, fail_lipsync_calls: Vec<u64>) -> Self {
        Self {
            inner,
            calls: 0,
            fail_lipsync_calls,
            fail_tts_calls: Vec::new(),
            tts_calls: 0,
        }
    }

    pub fn failing_tts(mut self, calls: Vec<u64>) -> Self {
        self.fail_tts_calls = calls;
        self
    }
}

impl<B: SynthesisBackend> SynthesisBackend for FaultyBackend<B> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        self.inner.register_profile(profile_id, container_tag, driving_video)
    }

    fn tts(&mut self, voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        let n = self.tts_calls;
        self.tts_calls += 1;
        if self.fail_tts_calls.contains(&n) {
            return Err(BackendError::Remote {
                code: "injected".into(),
                message: format!("tts call {n}"),
            });
        }
        self.inner.tts(voice_id, text)
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        let n = self.calls;
        self.calls += 1;
        if self.fail_lipsync_calls.contains(&n) {
            return Err(BackendError::Remote {
                code: "injected".into(),
                message: format!("lipsync call {n}"),
            });
        }
        self.inner.lipsync(profile_id, audio, fps, start_frame)
    }
}
