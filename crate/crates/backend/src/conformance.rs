//! Protocol conformance suite, runnable against any backend reachable over
//! a [`LineConn`].
//!
//! Generic checks cover the hello exchange, pipelining with id matching,
//! error codes, the frame-size law and draining shutdown. With
//! `procedural` set, the mock's formulas are checked too and media hashes
//! are collected as goldens.

use std::collections::{BTreeMap, HashSet};
use std::io;

use sha2::{Digest, Sha256};
use txt2vid_core::media::{PcmAudio, PixelFormat, VideoFrame};
use txt2vid_core::synth::protocol::{BackendRequest, BackendResponse};
use txt2vid_core::synth::{encode_raw_video, RAW_VIDEO_TAG};

use crate::LineConn;

/// Goldens of the built-in mock.
pub const MOCK_GOLDENS: &str = include_str!("../goldens/mock.json");

pub const PROFILE_ID: u16 = 7;
const PROFILE_W: u32 = 16;
const PROFILE_H: u32 = 12;
const PROFILE_COLORS: [u8; 3] = [40, 120, 200];

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    /// Also check the procedural formulas (TTS duration, looping, RMS box).
    pub procedural: bool,
    /// Expected goldens; compared when `procedural` is set.
    pub goldens: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    /// Name -> sha256 hex of the media bytes.
    pub goldens: BTreeMap<String, String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn check(&mut self, name: &'static str, result: Result<(), String>) {
        let (passed, detail) = match result {
            Ok(()) => (true, String::new()),
            Err(d) => (false, d),
        };
        self.checks.push(Check { name, passed, detail });
    }
}

pub fn parse_goldens(json: &str) -> serde_json::Result<BTreeMap<String, String>> {
    serde_json::from_str(json)
}

/// The 3-frame RAWV driving clip used by the suite.
pub fn test_profile() -> Vec<u8> {
    let frames: Vec<VideoFrame> = PROFILE_COLORS
        .iter()
        .map(|&c| VideoFrame {
            width: PROFILE_W,
            height: PROFILE_H,
            format: PixelFormat::Rgb24,
            pts_ms: 0,
            data: vec![c; (PROFILE_W * PROFILE_H * 3) as usize],
        })
        .collect();
    encode_raw_video(&frames)
}

/// Full-scale square wave, 16 kHz, period 40 samples.
pub fn square_wave(ms: u64) -> PcmAudio {
    let n = (ms * 16) as usize;
    PcmAudio::new(16_000, (0..n).map(|i| if (i / 20) % 2 == 0 { i16::MAX } else { -i16::MAX }).collect())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn frames_bytes(frames: &[VideoFrame]) -> Vec<u8> {
    frames.iter().flat_map(|f| f.data.iter().copied()).collect()
}

fn expect_code(resp: &BackendResponse, id: u64, code: &str) -> Result<(), String> {
    if resp.request_id == id && resp.code.as_deref() == Some(code) && !resp.is_ok() {
        Ok(())
    } else {
        Err(format!("expected error {code:?} for id {id}, got {resp:?}"))
    }
}

fn io_err(e: io::Error) -> String {
    e.to_string()
}

fn exchange(conn: &mut LineConn, line: &str) -> Result<BackendResponse, String> {
    conn.send_line(line).map_err(io_err)?;
    conn.recv().map_err(io_err)?.ok_or_else(|| "connection closed".to_string())
}

fn call(conn: &mut LineConn, req: &BackendRequest) -> Result<BackendResponse, String> {
    exchange(conn, &req.to_line())
}

/// Runs the whole suite. The connection is shut down at the end.
pub fn run_suite(conn: &mut LineConn, opts: &SuiteOptions) -> Report {
    let mut r = Report::default();

    r.check("hello", (|| {
        let resp = call(conn, &BackendRequest::Hello { request_id: 1 })?;
        if resp.request_id != 1 {
            return Err(format!("hello answered with id {}", resp.request_id));
        }
        let caps = resp.into_capabilities().map_err(|e| e.to_string())?;
        for op in ["tts", "lipsync"] {
            if !caps.ops.iter().any(|o| o == op) {
                return Err(format!("capabilities lack {op:?}: {:?}", caps.ops));
            }
        }
        Ok(())
    })());

    r.check("register_profile", (|| {
        let resp = call(conn, &BackendRequest::register_profile(2, PROFILE_ID, RAW_VIDEO_TAG, &test_profile()))?;
        resp.into_unit().map_err(|e| e.to_string())
    })());

    let mut tts_audio = None;
    let mut square_frames = None;
    r.check("pipelining", (|| {
        let tts = BackendRequest::Tts {
            request_id: 10,
            voice_id: "conformance".into(),
            text: "hello world".into(),
        };
        let lip = BackendRequest::lipsync(11, PROFILE_ID, &square_wave(400), 25, 0);
        let hello = BackendRequest::Hello { request_id: 12 };
        for req in [&tts, &lip, &hello] {
            conn.send(req).map_err(io_err)?;
        }
        let mut seen = HashSet::new();
        for _ in 0..3 {
            let resp = conn.recv().map_err(io_err)?.ok_or("connection closed mid-pipeline")?;
            if !seen.insert(resp.request_id) {
                return Err(format!("duplicate response for id {}", resp.request_id));
            }
            match resp.request_id {
                10 => tts_audio = Some(resp.into_audio().map_err(|e| e.to_string())?),
                11 => square_frames = Some(resp.into_frames().map_err(|e| e.to_string())?),
                12 => resp.into_capabilities().map(drop).map_err(|e| e.to_string())?,
                other => return Err(format!("unexpected response id {other}")),
            }
        }
        Ok(())
    })());

    r.check("frame_size_law", (|| {
        let audio = square_wave(400);
        let resp = call(conn, &BackendRequest::lipsync(13, PROFILE_ID, &audio, 25, 0))?;
        let (count, w, h) = (
            resp.frame_count.unwrap_or(0) as usize,
            resp.width.unwrap_or(0) as usize,
            resp.height.unwrap_or(0) as usize,
        );
        let raw = base64_len(resp.frames_b64.as_deref().unwrap_or(""))?;
        if raw != count * w * h * 3 {
            return Err(format!("frames_b64 is {raw} bytes for {count} x {w} x {h} x 3"));
        }
        let frames = resp.into_frames().map_err(|e| e.to_string())?;
        // ceil(400 ms * 25 fps / 1000)
        if frames.len() != 10 {
            return Err(format!("{} frames for 400 ms at 25 fps", frames.len()));
        }
        Ok(())
    })());

    let errors: [(&'static str, String, u64, &str); 7] = [
        ("error_parse", "{not json".into(), 0, "parse"),
        ("error_not_object", "[1,2]".into(), 0, "parse"),
        ("error_unsupported", r#"{"op":"dance","request_id":20}"#.into(), 20, "unsupported"),
        ("error_bad_request", r#"{"op":"tts","request_id":21}"#.into(), 21, "bad_request"),
        (
            "error_empty_text",
            r#"{"op":"tts","request_id":22,"voice_id":"v","text":""}"#.into(),
            22,
            "empty_text",
        ),
        (
            "error_audio_too_short",
            BackendRequest::lipsync(23, PROFILE_ID, &square_wave(150), 25, 0).to_line(),
            23,
            "audio_too_short",
        ),
        (
            "error_unknown_profile",
            BackendRequest::lipsync(24, 999, &square_wave(400), 25, 0).to_line(),
            24,
            "unknown_profile",
        ),
    ];
    for (name, line, id, code) in errors {
        let result = exchange(conn, &line).and_then(|resp| expect_code(&resp, id, code));
        r.checks.push(Check {
            name,
            passed: result.is_ok(),
            detail: result.err().unwrap_or_default(),
        });
    }

    if opts.procedural {
        procedural_checks(conn, &mut r, tts_audio, square_frames);
        if let Some(expected) = &opts.goldens {
            let goldens = r.goldens.clone();
            r.check("goldens", compare_goldens(expected, &goldens));
        }
    }

    r.check("shutdown_drains", (|| {
        // A request still in flight when shutdown arrives must be answered
        // before the acknowledgement.
        let tts = BackendRequest::Tts {
            request_id: 30,
            voice_id: "conformance".into(),
            text: "drain me".into(),
        };
        conn.send(&tts).map_err(io_err)?;
        conn.send(&BackendRequest::Shutdown { request_id: 31 }).map_err(io_err)?;
        let mut ids = Vec::new();
        while let Some(resp) = conn.recv().map_err(io_err)? {
            ids.push(resp.request_id);
        }
        if ids != [30, 31] {
            return Err(format!("responses before close: {ids:?}"));
        }
        Ok(())
    })());
    r
}

fn procedural_checks(conn: &mut LineConn, r: &mut Report, tts_audio: Option<PcmAudio>, square: Option<Vec<VideoFrame>>) {
    let mut g = BTreeMap::new();
    r.check("tts_duration_law", (|| {
        let audio = tts_audio.as_ref().ok_or("no tts audio from the pipelining check")?;
        // max(300, round(11 * 1000 / 15)) ms at 16 kHz
        if audio.sample_rate != 16_000 || audio.samples.len() != 733 * 16 {
            return Err(format!("{} samples at {} Hz", audio.samples.len(), audio.sample_rate));
        }
        let floor = call(
            conn,
            &BackendRequest::Tts {
                request_id: 40,
                voice_id: "v".into(),
                text: "a".into(),
            },
        )?
        .into_audio()
        .map_err(|e| e.to_string())?;
        if floor.samples.len() != 4800 {
            return Err(format!("\"a\" gave {} samples, expected the 300 ms floor", floor.samples.len()));
        }
        r_golden(&mut g, "tts_a", &floor.to_le_bytes());
        r_golden(&mut g, "tts_hello_world", &audio.to_le_bytes());
        Ok(())
    })());

    r.check("lipsync_looping", (|| {
        let frames = square.as_ref().ok_or("no frames from the pipelining check")?;
        let idx: Vec<usize> = frames
            .iter()
            .map(|f| PROFILE_COLORS.iter().position(|&c| f.pixel(0, 0)[0] == c).unwrap_or(usize::MAX))
            .collect();
        if idx != [0, 1, 2, 0, 1, 2, 0, 1, 2, 0] {
            return Err(format!("driving indices {idx:?}"));
        }
        let mouth = frames.iter().map(|f| f.pixel(PROFILE_W / 2, PROFILE_H - 1)[0]).collect::<Vec<_>>();
        if mouth.iter().any(|&g| g != 255) {
            return Err(format!("full-scale square gave mouth gray {mouth:?}"));
        }
        r_golden(&mut g, "lipsync_square_400ms", &frames_bytes(frames));
        Ok(())
    })());

    r.check("lipsync_silence", (|| {
        let frames = call(conn, &BackendRequest::lipsync(41, PROFILE_ID, &PcmAudio::silence(16_000, 200), 25, 0))?
            .into_frames()
            .map_err(|e| e.to_string())?;
        if frames.len() != 5 || frames.iter().any(|f| f.pixel(PROFILE_W / 2, PROFILE_H - 1) != [0, 0, 0]) {
            return Err(format!("{} frames, expected 5 with a black mouth box", frames.len()));
        }
        Ok(())
    })());

    r.check("lipsync_continuity", (|| {
        let audio = tts_audio.as_ref().ok_or("no tts audio")?;
        let frames = call(conn, &BackendRequest::lipsync(42, PROFILE_ID, audio, 25, 4))?
            .into_frames()
            .map_err(|e| e.to_string())?;
        if frames.first().map(|f| f.pixel(0, 0)[0]) != Some(PROFILE_COLORS[1]) {
            return Err("start_frame 4 must begin on driving frame 1".into());
        }
        r_golden(&mut g, "lipsync_hello_world_start4", &frames_bytes(&frames));
        Ok(())
    })());
    r.goldens.extend(g);
}

fn r_golden(goldens: &mut BTreeMap<String, String>, name: &str, bytes: &[u8]) {
    goldens.insert(name.to_string(), sha256_hex(bytes));
}

fn compare_goldens(expected: &BTreeMap<String, String>, got: &BTreeMap<String, String>) -> Result<(), String> {
    let diffs: Vec<String> = expected
        .iter()
        .filter(|(k, v)| got.get(*k) != Some(*v))
        .map(|(k, v)| format!("{k}: expected {v}, got {}", got.get(k).map(String::as_str).unwrap_or("nothing")))
        .collect();
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(diffs.join("; "))
    }
}

fn base64_len(s: &str) -> Result<usize, String> {
    use base64::Engine;
    base64::engine::general_purpose::STANDARD
        .decode(s)
        .map(|v| v.len())
        .map_err(|e| format!("frames_b64: {e}"))
}
