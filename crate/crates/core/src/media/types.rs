use serde::{Deserialize, Serialize};

/// Default sample rate of all synthesized and passthrough audio.
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_FPS: u32 = 25;
/// Smallest audio window the lip-sync model accepts.
pub const MIN_CHUNK_MS: u32 = 200;

/// Mono 16-bit PCM.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PcmAudio {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

impl PcmAudio {
    pub fn new(sample_rate: u32, samples: Vec<i16>) -> Self {
        Self { sample_rate, samples }
    }

    pub fn silence(sample_rate: u32, duration_ms: u64) -> Self {
        Self {
            sample_rate,
            samples: vec![0; samples_for_ms(sample_rate, duration_ms)],
        }
    }

    /// Truncating; use [`PcmAudio::duration_ms_exact`] for pacing math.
    pub fn duration_ms(&self) -> u64 {
        if self.sample_rate == 0 {
            return 0;
        }
        self.samples.len() as u64 * 1000 / self.sample_rate as u64
    }

    pub fn duration_ms_exact(&self) -> f64 {
        if self.sample_rate == 0 {
            return 0.0;
        }
        self.samples.len() as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(sample_rate: u32, bytes: &[u8]) -> Option<Self> {
        if !bytes.len().is_multiple_of(2) {
            return None;
        }
        Some(Self {
            sample_rate,
            samples: bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect(),
        })
    }
}

/// Samples covering `ms` at `rate`, rounded half up.
pub fn samples_for_ms(rate: u32, ms: u64) -> usize {
    ((ms * rate as u64 + 500) / 1000) as usize
}

/// One unit of work for the lip-sync backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediaChunk {
    /// Padded to the chunk floor when `is_final`.
    pub audio: PcmAudio,
    /// Real (unpadded) samples at the start of `audio`.
    pub content_samples: usize,
    pub chunk_index: u32,
    pub is_final: bool,
}

impl MediaChunk {
    pub fn content(&self) -> &[i16] {
        &self.audio.samples[..self.content_samples]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelFormat {
    Rgb24,
}

/// Packed RGB24 frame, row-major, no padding.
#[derive(Clone, PartialEq, Eq)]
pub struct VideoFrame {
    pub width: u32,
    pub height: u32,
    pub format: PixelFormat,
    pub pts_ms: u64,
    pub data: Vec<u8>,
}

impl std::fmt::Debug for VideoFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VideoFrame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("pts_ms", &self.pts_ms)
            .field("bytes", &self.data.len())
            .finish()
    }
}

impl VideoFrame {
    pub fn black(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            format: PixelFormat::Rgb24,
            pts_ms: 0,
            data: vec![0; frame_len(width, height)],
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.data.len() == frame_len(self.width, self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

pub fn frame_len(width: u32, height: u32) -> usize {
    width as usize * height as usize * 3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Offline decode of a stored transcript into a container file.
    File,
    /// Buffered streaming, a few seconds of latency tolerated.
    Stream,
    /// Interactive; tight latency.
    Live,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::File => "file",
            Mode::Stream => "stream",
            Mode::Live => "live",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "file" => Ok(Mode::File),
            "stream" => Ok(Mode::Stream),
            "live" => Ok(Mode::Live),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub fps: u32,
    pub chunk_ms: u32,
    pub jitter_buffer_ms: u32,
    pub sample_rate: u32,
    /// Silence inserted for a segment that never arrived.
    pub gap_fill_ms: u32,
    /// Backend failures tolerated in a row before the pipeline gives up.
    pub max_consecutive_failures: u32,
    /// Size of filler frames when no frame has been synthesized yet.
    pub fallback_width: u32,
    pub fallback_height: u32,
}

impl PipelineConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let jitter_buffer_ms = match mode {
            Mode::File => 0,
            Mode::Stream => 5000,
            Mode::Live => 500,
        };
        Self {
            mode,
            fps: DEFAULT_FPS,
            chunk_ms: MIN_CHUNK_MS,
            jitter_buffer_ms,
            sample_rate: DEFAULT_SAMPLE_RATE,
            gap_fill_ms: 1000,
            max_consecutive_failures: 3,
            fallback_width: 1280,
            fallback_height: 720,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.chunk_ms < MIN_CHUNK_MS {
            return Err(format!("chunk_ms {} below the {MIN_CHUNK_MS} ms floor", self.chunk_ms));
        }
        if self.fps == 0 {
            return Err("fps must be positive".into());
        }
        if self.sample_rate == 0 {
            return Err("sample_rate must be positive".into());
        }
        Ok(())
    }

    pub fn frame_interval_ms(&self) -> f64 {
        1000.0 / self.fps as f64
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::for_mode(Mode::Stream)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLatency {
    pub seq: u32,
    pub capture_to_first_frame_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencyStats {
    pub per_segment: Vec<SegmentLatency>,
    pub p50_ms: u64,
    pub p95_ms: u64,
    pub max_ms: u64,
    pub stall_count: u32,
    pub stall_total_ms: u64,
    pub gaps: u32,
    pub frames: u64,
    pub audio_samples: u64,
}

impl LatencyStats {
    /// Recomputes the percentiles (nearest rank) from `per_segment`.
    pub fn finalize(&mut self) {
        let mut v: Vec<u64> = self.per_segment.iter().map(|s| s.capture_to_first_frame_ms).collect();
        v.sort_unstable();
        self.p50_ms = nearest_rank(&v, 50);
        self.p95_ms = nearest_rank(&v, 95);
        self.max_ms = v.last().copied().unwrap_or(0);
    }
}

fn nearest_rank(sorted: &[u64], pct: u64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (pct as usize * sorted.len()).div_ceil(100).max(1);
    sorted[rank - 1]
}
