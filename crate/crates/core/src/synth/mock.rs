//! Procedural stand-ins for voice cloning and lip-sync.
//!
//! Everything here is integer or correctly-rounded IEEE arithmetic, so the
//! output is bit-identical on every platform. The sine comes from a fixed
//! quarter-wave table driven by a 32-bit phase accumulator.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{decode_driving_video, BackendError, Capabilities, DrivingProfile, SynthesisBackend};
use crate::media::{samples_for_ms, PcmAudio, VideoFrame, DEFAULT_SAMPLE_RATE, MIN_CHUNK_MS};

/// round(32767 * sin(pi/2 * k/256)) for k in 0..=256.
#[rustfmt::skip]
pub const SINE_QUARTER: [i16; 257] = [
    0, 201, 402, 603, 804, 1005, 1206, 1407, 1608, 1809, 2009, 2210, 2410, 2611, 2811, 3012, 3212,
    3412, 3612, 3811, 4011, 4210, 4410, 4609, 4808, 5007, 5205, 5404, 5602, 5800, 5998, 6195, 6393,
    6590, 6786, 6983, 7179, 7375, 7571, 7767, 7962, 8157, 8351, 8545, 8739, 8933, 9126, 9319, 9512,
    9704, 9896, 10087, 10278, 10469, 10659, 10849, 11039, 11228, 11417, 11605, 11793, 11980, 12167,
    12353, 12539, 12725, 12910, 13094, 13279, 13462, 13645, 13828, 14010, 14191, 14372, 14553,
    14732, 14912, 15090, 15269, 15446, 15623, 15800, 15976, 16151, 16325, 16499, 16673, 16846,
    17018, 17189, 17360, 17530, 17700, 17869, 18037, 18204, 18371, 18537, 18703, 18868, 19032,
    19195, 19357, 19519, 19680, 19841, 20000, 20159, 20317, 20475, 20631, 20787, 20942, 21096,
    21250, 21403, 21554, 21705, 21856, 22005, 22154, 22301, 22448, 22594, 22739, 22884, 23027,
    23170, 23311, 23452, 23592, 23731, 23870, 24007, 24143, 24279, 24413, 24547, 24680, 24811,
    24942, 25072, 25201, 25329, 25456, 25582, 25708, 25832, 25955, 26077, 26198, 26319, 26438,
    26556, 26674, 26790, 26905, 27019, 27133, 27245, 27356, 27466, 27575, 27683, 27790, 27896,
    28001, 28105, 28208, 28310, 28411, 28510, 28609, 28706, 28803, 28898, 28992, 29085, 29177,
    29268, 29358, 29447, 29534, 29621, 29706, 29791, 29874, 29956, 30037, 30117, 30195, 30273,
    30349, 30424, 30498, 30571, 30643, 30714, 30783, 30852, 30919, 30985, 31050, 31113, 31176,
    31237, 31297, 31356, 31414, 31470, 31526, 31580, 31633, 31685, 31736, 31785, 31833, 31880,
    31926, 31971, 32014, 32057, 32098, 32137, 32176, 32213, 32250, 32285, 32318, 32351, 32382,
    32412, 32441, 32469, 32495, 32521, 32545, 32567, 32589, 32609, 32628, 32646, 32663, 32678,
    32692, 32705, 32717, 32728, 32737, 32745, 32752, 32757, 32761, 32765, 32766, 32767,
];

/// Sine of a 10-bit phase (1024 steps per cycle), Q15.
fn sine_q15(phase10: u32) -> i32 {
    let q = (phase10 & 0xff) as usize;
    match (phase10 >> 8) & 3 {
        0 => SINE_QUARTER[q] as i32,
        1 => SINE_QUARTER[256 - q] as i32,
        2 => -(SINE_QUARTER[q] as i32),
        _ => -(SINE_QUARTER[256 - q] as i32),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockVoiceModel {
    /// Characters per second.
    pub speaking_rate: f64,
    pub base_freq: f64,
    pub amplitude: i16,
    pub sample_rate: u32,
}

impl Default for MockVoiceModel {
    fn default() -> Self {
        Self {
            speaking_rate: 15.0,
            base_freq: 440.0,
            amplitude: 8000,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl MockVoiceModel {
    /// max(300, round_half_up(chars * 1000 / speaking_rate)).
    pub fn duration_ms(&self, text: &str) -> u64 {
        let chars = text.chars().count() as f64;
        let raw = (chars * 1000.0 / self.speaking_rate + 0.5).floor() as u64;
        raw.max(300)
    }
}

pub fn mock_tts(text: &str, model: &MockVoiceModel) -> Result<PcmAudio, BackendError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Err(BackendError::EmptyText);
    }
    if model.speaking_rate.is_nan() || model.speaking_rate <= 0.0 || model.sample_rate == 0 {
        return Err(BackendError::BadRequest("speaking_rate and sample_rate must be positive".into()));
    }
    let duration_ms = model.duration_ms(text);
    let n = samples_for_ms(model.sample_rate, duration_ms);
    let phase_inc = (model.base_freq * 4_294_967_296.0 / model.sample_rate as f64).round() as u64 as u32;
    let amp = model.amplitude as i32;
    let samples = (0..n)
        .map(|i| {
            let ch = chars[i * chars.len() / n];
            if ch.is_whitespace() {
                0
            } else {
                let phase = (i as u32).wrapping_mul(phase_inc);
                ((amp * sine_q15(phase >> 22)) >> 15) as i16
            }
        })
        .collect();
    Ok(PcmAudio::new(model.sample_rate, samples))
}

/// Gray level (0..=255) proportional to the RMS of `window`.
fn rms_gray(window: &[i16]) -> u8 {
    if window.is_empty() {
        return 0;
    }
    let sumsq: u64 = window.iter().map(|&s| (s as i64 * s as i64) as u64).sum();
    let rms = (sumsq as f64 / window.len() as f64).sqrt();
    (rms * 255.0 / 32767.0 + 0.5).floor().min(255.0) as u8
}

/// Driving frames `start_frame..` with the mouth box (bottom third, middle
/// half) painted at a gray level following the audio RMS of each frame's
/// window.
pub fn mock_lipsync(
    audio: &PcmAudio,
    profile: &DrivingProfile,
    fps: u32,
    start_frame: u64,
) -> Result<Vec<VideoFrame>, BackendError> {
    if profile.is_empty() {
        return Err(BackendError::EmptyProfile);
    }
    if fps == 0 || audio.sample_rate == 0 {
        return Err(BackendError::BadRequest("fps and sample_rate must be positive".into()));
    }
    if audio.samples.len() < samples_for_ms(audio.sample_rate, MIN_CHUNK_MS as u64) {
        return Err(BackendError::AudioTooShort(audio.duration_ms()));
    }
    let rate = audio.sample_rate as u64;
    let len = audio.samples.len() as u64;
    let count = (len * fps as u64).div_ceil(rate);
    let (w, h) = (profile.width, profile.height);
    let (x0, x1, y0) = (w / 4, 3 * w / 4, 2 * h / 3);
    Ok((0..count)
        .map(|i| {
            let lo = (i * rate / fps as u64).min(len) as usize;
            let hi = ((i + 1) * rate / fps as u64).min(len) as usize;
            let gray = rms_gray(&audio.samples[lo..hi]);
            let mut frame = profile.frame(start_frame + i);
            frame.pts_ms = i * 1000 / fps as u64;
            for y in y0..h {
                let row = (y * w) as usize * 3;
                frame.data[row + x0 as usize * 3..row + x1 as usize * 3].fill(gray);
            }
            frame
        })
        .collect())
}

/// In-process mock backend.
#[derive(Debug, Default)]
pub struct MockBackend {
    pub model: MockVoiceModel,
    profiles: HashMap<u16, DrivingProfile>,
}

impl MockBackend {
    pub fn new(model: MockVoiceModel) -> Self {
        Self {
            model,
            profiles: HashMap::new(),
        }
    }

    pub fn with_profile(mut self, profile_id: u16, profile: DrivingProfile) -> Self {
        self.profiles.insert(profile_id, profile);
        self
    }

    pub fn insert_profile(&mut self, profile_id: u16, profile: DrivingProfile) {
        self.profiles.insert(profile_id, profile);
    }

    pub fn profile(&self, profile_id: u16) -> Option<&DrivingProfile> {
        self.profiles.get(&profile_id)
    }
}

pub const MOCK_OPS: [&str; 5] = ["hello", "tts", "lipsync", "register_profile", "shutdown"];

impl SynthesisBackend for MockBackend {
    fn capabilities(&self) -> Capabilities {
        Capabilities {
            ops: MOCK_OPS.iter().map(|s| s.to_string()).collect(),
            max_chunk_ms: 10_000,
            binary: false,
        }
    }

    fn register_profile(&mut self, profile_id: u16, container_tag: [u8; 4], driving_video: &[u8]) -> Result<(), BackendError> {
        let profile = decode_driving_video(container_tag, driving_video)?;
        self.profiles.insert(profile_id, profile);
        Ok(())
    }

    /// The voice id does not change the mock voice.
    fn tts(&mut self, _voice_id: &str, text: &str) -> Result<PcmAudio, BackendError> {
        mock_tts(text, &self.model)
    }

    fn lipsync(&mut self, profile_id: u16, audio: &PcmAudio, fps: u32, start_frame: u64) -> Result<Vec<VideoFrame>, BackendError> {
        let profile = self.profiles.get(&profile_id).ok_or(BackendError::UnknownProfile(profile_id))?;
        mock_lipsync(audio, profile, fps, start_frame)
    }
}
