//! Newline-delimited JSON protocol between the receiver and a synthesis
//! backend process.
//!
//! One request per line, one response per line. Responses carry the
//! request's `request_id` and may come back in any order. Media travels as
//! base64: PCM as little-endian i16 mono, frames as concatenated RGB24.
//!
//! ```text
//! -> {"op":"hello","request_id":1}
//! <- {"request_id":1,"status":"ok","ops":["hello","tts",...],"max_chunk_ms":10000,"binary":false}
//! -> {"op":"tts","request_id":2,"voice_id":"alice","text":"hello world"}
//! <- {"request_id":2,"status":"ok","audio_b64":"...","sample_rate":16000}
//! -> {"op":"lipsync","request_id":3,"profile_id":1,"audio_b64":"...","sample_rate":16000,"fps":25}
//! <- {"request_id":3,"status":"ok","frame_count":5,"width":1280,"height":720,"frames_b64":"..."}
//! -> {"op":"register_profile","request_id":4,"profile_id":1,"driving_video_b64":"...","container_tag":"MP4 "}
//! <- {"request_id":4,"status":"ok"}
//! -> {"op":"shutdown","request_id":5}
//! <- {"request_id":5,"status":"ok"}
//! ```
//!
//! Errors: `{"request_id":N,"status":"error","code":"...","message":"..."}`.
//! Unparseable lines get `request_id` 0 and code `parse`; unknown ops get
//! code `unsupported`.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{BackendError, Capabilities, SynthesisBackend};
use crate::media::{frame_len, PcmAudio, PixelFormat, VideoFrame};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BackendRequest {
    Hello {
        request_id: u64,
    },
    Tts {
        request_id: u64,
        voice_id: String,
        text: String,
    },
    Lipsync {
        request_id: u64,
        profile_id: u16,
        audio_b64: String,
        sample_rate: u32,
        fps: u32,
        #[serde(default)]
        start_frame: u64,
    },
    RegisterProfile {
        request_id: u64,
        profile_id: u16,
        driving_video_b64: String,
        container_tag: String,
    },
    Shutdown {
        request_id: u64,
    },
}

impl BackendRequest {
    pub fn request_id(&self) -> u64 {
        match self {
            BackendRequest::Hello { request_id }
            | BackendRequest::Tts { request_id, .. }
            | BackendRequest::Lipsync { request_id, .. }
            | BackendRequest::RegisterProfile { request_id, .. }
            | BackendRequest::Shutdown { request_id } => *request_id,
        }
    }

    pub fn lipsync(request_id: u64, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Self {
        BackendRequest::Lipsync {
            request_id,
            profile_id,
            audio_b64: B64.encode(audio.to_le_bytes()),
            sample_rate: audio.sample_rate,
            fps,
            start_frame,
        }
    }

    pub fn register_profile(request_id: u64, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Self {
        BackendRequest::RegisterProfile {
            request_id,
            profile_id,
            driving_video_b64: B64.encode(driving_video),
            container_tag: String::from_utf8_lossy(&container_tag).into_owned(),
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serializable");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub request_id: u64,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ops: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chunk_ms: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl BackendResponse {
    pub fn ok(request_id: u64) -> Self {
        Self {
            request_id,
            status: ResponseStatus::Ok,
            ops: None,
            max_chunk_ms: None,
            binary: None,
            audio_b64: None,
            sample_rate: None,
            frame_count: None,
            width: None,
            height: None,
            frames_b64: None,
            code: None,
            message: None,
        }
    }

    pub fn error(request_id: u64, code: &str, message: impl Into<String>) -> Self {
        Self {
            status: ResponseStatus::Error,
            code: Some(code.to_string()),
            message: Some(message.into()),
            ..Self::ok(request_id)
        }
    }

    pub fn from_backend_error(request_id: u64, e: &BackendError) -> Self {
        Self::error(request_id, e.code(), e.to_string())
    }

    pub fn hello(request_id: u64, caps: &Capabilities) -> Self {
        Self {
            ops: Some(caps.ops.clone()),
            max_chunk_ms: Some(caps.max_chunk_ms),
            binary: Some(caps.binary),
            ..Self::ok(request_id)
        }
    }

    pub fn tts(request_id: u64, audio: &PcmAudio) -> Self {
        Self {
            audio_b64: Some(B64.encode(audio.to_le_bytes())),
            sample_rate: Some(audio.sample_rate),
            ..Self::ok(request_id)
        }
    }

    pub fn lipsync(request_id: u64, frames: &[VideoFrame]) -> Self {
        let (width, height) = frames.first().map(|f| (f.width, f.height)).unwrap_or((0, 0));
        let mut raw = Vec::with_capacity(frames.len() * frame_len(width, height));
        for f in frames {
            raw.extend_from_slice(&f.data);
        }
        Self {
            frame_count: Some(frames.len() as u32),
            width: Some(width),
            height: Some(height),
            frames_b64: Some(B64.encode(raw)),
            ..Self::ok(request_id)
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ResponseStatus::Ok
    }

    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("serializable");
        s.push('\n');
        s
    }

    fn check_ok(&self) -> Result<(), BackendError> {
        match self.status {
            ResponseStatus::Ok => Ok(()),
            ResponseStatus::Error => Err(BackendError::Remote {
                code: self.code.clone().unwrap_or_default(),
                message: self.message.clone().unwrap_or_default(),
            }),
        }
    }

    pub fn into_capabilities(self) -> Result<Capabilities, BackendError> {
        self.check_ok()?;
        Ok(Capabilities {
            ops: self.ops.ok_or_else(|| bad("hello response without ops"))?,
            max_chunk_ms: self.max_chunk_ms.unwrap_or(0),
            binary: self.binary.unwrap_or(false),
        })
    }

    pub fn into_audio(self) -> Result<PcmAudio, BackendError> {
        self.check_ok()?;
        let rate = self.sample_rate.ok_or_else(|| bad("tts response without sample_rate"))?;
        let raw = decode_b64(self.audio_b64.as_deref().unwrap_or(""))?;
        PcmAudio::from_le_bytes(rate, &raw).ok_or_else(|| bad("odd PCM byte count"))
    }

    /// Splits `frames_b64` into frames, enforcing the frame-size law.
    pub fn into_frames(self) -> Result<Vec<VideoFrame>, BackendError> {
        self.check_ok()?;
        let count = self.frame_count.ok_or_else(|| bad("lipsync response without frame_count"))? as usize;
        let (w, h) = (self.width.unwrap_or(0), self.height.unwrap_or(0));
        let raw = decode_b64(self.frames_b64.as_deref().unwrap_or(""))?;
        let each = frame_len(w, h);
        if raw.len() != count * each {
            return Err(bad(&format!(
                "frames_b64 decodes to {} bytes, expected {count} x {w} x {h} x 3",
                raw.len()
            )));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        Ok(raw
            .chunks_exact(each)
            .map(|d| VideoFrame {
                width: w,
                height: h,
                format: PixelFormat::Rgb24,
                pts_ms: 0,
                data: d.to_vec(),
            })
            .collect())
    }

    pub fn into_unit(self) -> Result<(), BackendError> {
        self.check_ok()
    }
}

fn bad(msg: &str) -> BackendError {
    BackendError::BadRequest(msg.to_string())
}

fn decode_b64(s: &str) -> Result<Vec<u8>, BackendError> {
    B64.decode(s).map_err(|e| bad(&format!("base64: {e}")))
}

const KNOWN_OPS: [&str; 5] = ["hello", "tts", "lipsync", "register_profile", "shutdown"];

/// Parses one request line. On failure returns the error response to send.
#[allow(clippy::result_large_err)]
pub fn parse_request(line: &str) -> Result<BackendRequest, BackendResponse> {
    let value: serde_json::Value = serde_json::from_str(line)
        .map_err(|e| BackendResponse::error(0, "parse", format!("invalid JSON: {e}")))?;
    let Some(obj) = value.as_object() else {
        return Err(BackendResponse::error(0, "parse", "request must be a JSON object"));
    };
    let request_id = obj.get("request_id").and_then(|v| v.as_u64()).unwrap_or(0);
    let op = obj.get("op").and_then(|v| v.as_str()).unwrap_or("");
    if !KNOWN_OPS.contains(&op) {
        return Err(BackendResponse::error(request_id, "unsupported", format!("unknown op {op:?}")));
    }
    serde_json::from_value(value).map_err(|e| BackendResponse::error(request_id, "bad_request", e.to_string()))
}

/// Runs one request against a backend. `shutdown` is answered here; the
/// transport decides when to close.
pub fn dispatch(backend: &mut dyn SynthesisBackend, request: &BackendRequest) -> BackendResponse {
    match request {
        BackendRequest::Hello { request_id } => BackendResponse::hello(*request_id, &backend.capabilities()),
        BackendRequest::Tts {
            request_id,
            voice_id,
            text,
        } => match backend.tts(voice_id, text) {
            Ok(audio) => BackendResponse::tts(*request_id, &audio),
            Err(e) => BackendResponse::from_backend_error(*request_id, &e),
        },
        BackendRequest::Lipsync {
            request_id,
            profile_id,
            audio_b64,
            sample_rate,
            fps,
            start_frame,
        } => {
            let audio = match decode_b64(audio_b64)
                .and_then(|raw| PcmAudio::from_le_bytes(*sample_rate, &raw).ok_or_else(|| bad("odd PCM byte count")))
            {
                Ok(a) => a,
                Err(e) => return BackendResponse::from_backend_error(*request_id, &e),
            };
            match backend.lipsync(*profile_id, &audio, *fps, *start_frame) {
                Ok(frames) => BackendResponse::lipsync(*request_id, &frames),
                Err(e) => BackendResponse::from_backend_error(*request_id, &e),
            }
        }
        BackendRequest::RegisterProfile {
            request_id,
            profile_id,
            driving_video_b64,
            container_tag,
        } => {
            let Ok(tag) = <[u8; 4]>::try_from(container_tag.as_bytes()) else {
                return BackendResponse::error(*request_id, "bad_request", "container_tag must be 4 bytes");
            };
            let result = decode_b64(driving_video_b64).and_then(|blob| backend.register_profile(*profile_id, tag, &blob));
            match result {
                Ok(()) => BackendResponse::ok(*request_id),
                Err(e) => BackendResponse::from_backend_error(*request_id, &e),
            }
        }
        BackendRequest::Shutdown { request_id } => BackendResponse::ok(*request_id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{encode_raw_video, MockBackend, RAW_VIDEO_TAG};

    #[test]
    fn request_wire_shape() {
        let r = BackendRequest::Tts {
            request_id: 7,
            voice_id: "v".into(),
            text: "hi".into(),
        };
        assert_eq!(r.to_line(), "{\"op\":\"tts\",\"request_id\":7,\"voice_id\":\"v\",\"text\":\"hi\"}\n");
        assert_eq!(parse_request(r.to_line().trim()).unwrap(), r);
    }

    #[test]
    fn parse_errors() {
        let e = parse_request("{nope").unwrap_err();
        assert_eq!((e.request_id, e.code.as_deref()), (0, Some("parse")));
        let e = parse_request("{\"op\":\"dance\",\"request_id\":4}").unwrap_err();
        assert_eq!((e.request_id, e.code.as_deref()), (4, Some("unsupported")));
        let e = parse_request("{\"op\":\"tts\",\"request_id\":5}").unwrap_err();
        assert_eq!(e.code.as_deref(), Some("bad_request"));
    }

    #[test]
    fn dispatch_round_trip() {
        let mut b = MockBackend::default();
        let profile = encode_raw_video(&[VideoFrame::black(4, 3)]);
        let reg = dispatch(&mut b, &BackendRequest::register_profile(1, 9, RAW_VIDEO_TAG, &profile));
        assert!(reg.is_ok());
        let tts = dispatch(
            &mut b,
            &BackendRequest::Tts {
                request_id: 2,
                voice_id: "x".into(),
                text: "hello".into(),
            },
        );
        let audio = tts.into_audio().unwrap();
        let lip = dispatch(&mut b, &BackendRequest::lipsync(3, 9, &audio, 25, 0));
        assert_eq!(lip.request_id, 3);
        let frames = lip.into_frames().unwrap();
        assert_eq!(frames.len(), 9); // 333 ms -> ceil(8.33)
        assert_eq!(frames[0].data.len(), 4 * 3 * 3);
    }

    #[test]
    fn frame_size_law_enforced() {
        let mut r = BackendResponse::lipsync(1, &[VideoFrame::black(2, 2)]);
        r.frame_count = Some(2);
        assert!(r.into_frames().is_err());
    }

    #[test]
    fn short_audio_is_protocol_error() {
        let mut b = MockBackend::default().with_profile(
            1,
            crate::synth::DrivingProfile::from_frames(&[VideoFrame::black(2, 2)]),
        );
        let r = dispatch(&mut b, &BackendRequest::lipsync(1, 1, &PcmAudio::silence(16000, 150), 25, 0));
        assert_eq!(r.code.as_deref(), Some("audio_too_short"));
    }
}
