use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use super::grid::{CodecParams, VideoCodec, TARGET_FPS, TARGET_HEIGHT, TARGET_PIX_FMT, TARGET_SAMPLE_RATE, TARGET_WIDTH};
use super::BenchError;

/// x264 speed preset used for benchmark encodes.
pub const X264_PRESET: &str = "medium";
/// libaom speed; the table gives none, this keeps AV1 rows tractable.
pub const AOM_CPU_USED: u8 = 8;

/// An ffmpeg binary and the encoders it offers.
#[derive(Debug, Clone)]
pub struct Transcoder {
    pub path: PathBuf,
    pub version: String,
    encoders: HashSet<String>,
}

impl Transcoder {
    pub fn probe(path: &Path) -> Result<Self, BenchError> {
        let out = Command::new(path)
            .args(["-hide_banner", "-encoders"])
            .stdin(Stdio::null())
            .output()
            .map_err(|e| BenchError::TranscoderMissing(format!("{}: {e}", path.display())))?;
        if !out.status.success() {
            return Err(BenchError::TranscoderMissing(format!(
                "{} -encoders exited with {}",
                path.display(),
                out.status
            )));
        }
        let encoders = parse_encoders(&String::from_utf8_lossy(&out.stdout));
        let version = Command::new(path)
            .arg("-version")
            .output()
            .ok()
            .and_then(|o| String::from_utf8_lossy(&o.stdout).lines().next().map(str::to_string))
            .unwrap_or_default();
        Ok(Self {
            path: path.to_path_buf(),
            version,
            encoders,
        })
    }

    /// Probes `explicit` or whatever [`crate::media::mux::locate_ffmpeg`] finds.
    pub fn locate(explicit: Option<&Path>) -> Result<Self, BenchError> {
        let path = crate::media::mux::locate_ffmpeg(explicit).ok_or_else(|| {
            BenchError::TranscoderMissing(match explicit {
                Some(p) => format!("{} not found", p.display()),
                None => "no ffmpeg found".into(),
            })
        })?;
        Self::probe(&path)
    }

    pub fn has_encoder(&self, name: &str) -> bool {
        self.encoders.contains(name)
    }

    pub fn supports(&self, codec: VideoCodec) -> bool {
        self.has_encoder(codec.encoder())
    }

    /// `libfdk_aac` when built in, otherwise ffmpeg's native encoder.
    pub fn aac_encoder(&self) -> Option<&'static str> {
        if self.has_encoder("libfdk_aac") {
            Some("libfdk_aac")
        } else if self.has_encoder("aac") {
            Some("aac")
        } else {
            None
        }
    }

    /// Runs ffmpeg with `args`, mapping failure to [`BenchError::EncodeFailed`].
    pub fn run(&self, stage: &str, args: &[String]) -> Result<(), BenchError> {
        let out = Command::new(&self.path)
            .args(["-hide_banner", "-loglevel", "error", "-nostdin", "-y"])
            .args(args)
            .stdin(Stdio::null())
            .output()
            .map_err(|e| BenchError::TranscoderMissing(e.to_string()))?;
        if !out.status.success() {
            return Err(BenchError::EncodeFailed {
                stage: stage.to_string(),
                stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
            });
        }
        Ok(())
    }

    /// Counts packet bytes per stream by remuxing to `framecrc`.
    pub fn probe_streams(&self, file: &Path) -> Result<StreamProbe, BenchError> {
        let out = Command::new(&self.path)
            .args(["-hide_banner", "-nostdin", "-i"])
            .arg(file)
            .args(["-map", "0", "-c", "copy", "-f", "framecrc", "-"])
            .stdin(Stdio::null())
            .output()
            .map_err(|e| BenchError::TranscoderMissing(e.to_string()))?;
        if !out.status.success() {
            return Err(BenchError::Probe(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        parse_framecrc(&String::from_utf8_lossy(&out.stdout))
    }
}

fn parse_encoders(listing: &str) -> HashSet<String> {
    let mut seen_rule = false;
    let mut out = HashSet::new();
    for line in listing.lines() {
        if line.trim_start().starts_with("---") {
            seen_rule = true;
            continue;
        }
        if !seen_rule {
            continue;
        }
        let mut parts = line.split_whitespace();
        if let (Some(_flags), Some(name)) = (parts.next(), parts.next()) {
            out.insert(name.to_string());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamInfo {
    pub media_type: String,
    pub bytes: u64,
    pub packets: u64,
    /// Span from the first packet's pts to the last packet's end.
    pub duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamProbe {
    pub streams: BTreeMap<u32, StreamInfo>,
}

impl StreamProbe {
    pub fn bytes_of(&self, media_type: &str) -> u64 {
        self.streams.values().filter(|s| s.media_type == media_type).map(|s| s.bytes).sum()
    }

    pub fn duration_ms(&self) -> f64 {
        self.streams.values().map(|s| s.duration_ms).fold(0.0, f64::max)
    }
}

/// Parses ffmpeg's `framecrc` muxer output.
pub fn parse_framecrc(text: &str) -> Result<StreamProbe, BenchError> {
    let mut probe = StreamProbe::default();
    let mut timebase: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    let mut span: BTreeMap<u32, (i64, i64)> = BTreeMap::new();
    let bad = |line: &str| BenchError::Probe(format!("unexpected framecrc line {line:?}"));
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            let Some((key, value)) = rest.split_once(':') else { continue };
            let mut key = key.split_whitespace();
            let (Some(name), Some(idx)) = (key.next(), key.next().and_then(|i| i.parse::<u32>().ok())) else {
                continue;
            };
            let value = value.trim();
            match name {
                "tb" => {
                    let (n, d) = value.split_once('/').ok_or_else(|| bad(line))?;
                    let n = n.trim().parse().map_err(|_| bad(line))?;
                    let d = d.trim().parse().map_err(|_| bad(line))?;
                    timebase.insert(idx, (n, d));
                }
                "media_type" => probe.streams.entry(idx).or_default().media_type = value.to_string(),
                _ => {}
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 6 {
            continue;
        }
        let idx: u32 = cols[0].parse().map_err(|_| bad(line))?;
        let pts: i64 = cols[2].parse().map_err(|_| bad(line))?;
        let dur: i64 = cols[3].parse().map_err(|_| bad(line))?;
        let size: u64 = cols[4].parse().map_err(|_| bad(line))?;
        let s = probe.streams.entry(idx).or_default();
        s.bytes += size;
        s.packets += 1;
        let e = span.entry(idx).or_insert((pts, pts + dur));
        e.0 = e.0.min(pts);
        e.1 = e.1.max(pts + dur);
    }
    for (idx, (start, end)) in span {
        let (n, d) = timebase.get(&idx).copied().unwrap_or((1, 1000));
        if let Some(s) = probe.streams.get_mut(&idx) {
            s.duration_ms = (end - start) as f64 * n as f64 * 1000.0 / d as f64;
        }
    }
    Ok(probe)
}

fn strings(a: &[&str]) -> Vec<String> {
    a.iter().map(|s| s.to_string()).collect()
}

/// Steps 1 and 3: 720p / 25 fps / yuv420p video and 16 kHz mono audio in a
/// lossless intermediate.
pub fn normalize_args(input: &Path, out: &Path) -> Vec<String> {
    let mut a = strings(&["-i"]);
    a.push(input.display().to_string());
    a.extend(strings(&["-map", "0:v:0", "-map", "0:a:0", "-vf"]));
    a.push(format!(
        "scale={TARGET_WIDTH}:{TARGET_HEIGHT},fps={TARGET_FPS},format={TARGET_PIX_FMT}"
    ));
    a.extend(strings(&["-c:v", "libx264", "-preset", "ultrafast", "-qp", "0", "-ar"]));
    a.push(TARGET_SAMPLE_RATE.to_string());
    a.extend(strings(&["-ac", "1", "-c:a", "pcm_s16le", "-f", "matroska"]));
    a.push(out.display().to_string());
    a
}

/// Step 2: downsample and encode the video stream.
pub fn video_args(p: &CodecParams, normalized: &Path, out: &Path) -> Vec<String> {
    let mut a = strings(&["-i"]);
    a.push(normalized.display().to_string());
    a.extend(strings(&["-map", "0:v:0", "-an", "-vf"]));
    a.push(format!("scale={}:{}:flags=bicubic", p.width(), p.height()));
    a.extend(strings(&["-pix_fmt", TARGET_PIX_FMT, "-c:v", p.video_codec.encoder(), "-crf"]));
    a.push(p.crf.to_string());
    match p.video_codec {
        VideoCodec::H264 => a.extend(strings(&["-preset", X264_PRESET])),
        VideoCodec::Av1 => {
            a.extend(strings(&["-b:v", "0", "-row-mt", "1", "-cpu-used"]));
            a.push(AOM_CPU_USED.to_string());
        }
    }
    a.extend(strings(&["-f", "mp4"]));
    a.push(out.display().to_string());
    a
}

/// Step 4: downsample and encode the audio stream at a constrained bitrate.
pub fn audio_args(p: &CodecParams, aac_encoder: &str, normalized: &Path, out: &Path) -> Vec<String> {
    let mut a = strings(&["-i"]);
    a.push(normalized.display().to_string());
    a.extend(strings(&["-map", "0:a:0", "-vn", "-ar"]));
    a.push(p.audio_rate().to_string());
    a.extend(strings(&["-ac", "1", "-c:a", aac_encoder, "-b:a"]));
    a.push(format!("{}k", p.audio_br_kbps));
    a.extend(strings(&["-f", "mp4"]));
    a.push(out.display().to_string());
    a
}

/// Step 5: merge the two encoded streams without re-encoding.
pub fn merge_args(video: &Path, audio: &Path, out: &Path) -> Vec<String> {
    let mut a = strings(&["-i"]);
    a.push(video.display().to_string());
    a.push("-i".into());
    a.push(audio.display().to_string());
    a.extend(strings(&["-map", "0:v:0", "-map", "1:a:0", "-c", "copy", "-f", "mp4"]));
    a.push(out.display().to_string());
    a
}

/// Receiver side: upsample an encode back to 720p / 16 kHz for viewing.
pub fn playback_args(encoded: &Path, out: &Path) -> Vec<String> {
    let mut a = strings(&["-i"]);
    a.push(encoded.display().to_string());
    a.extend(strings(&["-vf"]));
    a.push(format!("scale={TARGET_WIDTH}:{TARGET_HEIGHT}:flags=bicubic"));
    a.extend(strings(&["-c:v", "libx264", "-preset", "ultrafast", "-crf", "18", "-pix_fmt", TARGET_PIX_FMT, "-ar"]));
    a.push(TARGET_SAMPLE_RATE.to_string());
    a.extend(strings(&["-c:a", "aac", "-f", "mp4"]));
    a.push(out.display().to_string());
    a
}

/// A moving test pattern with a tone, for runs without media assets.
pub fn synthetic_clip_args(duration_s: u32, out: &Path) -> Vec<String> {
    let mut a = strings(&["-f", "lavfi", "-i"]);
    a.push(format!("testsrc2=size={TARGET_WIDTH}x{TARGET_HEIGHT}:rate={TARGET_FPS}"));
    a.extend(strings(&["-f", "lavfi", "-i"]));
    a.push(format!("sine=frequency=440:sample_rate={TARGET_SAMPLE_RATE}"));
    a.push("-t".into());
    a.push(duration_s.to_string());
    a.extend(strings(&[
        "-c:v", "libx264", "-preset", "ultrafast", "-crf", "18", "-pix_fmt", TARGET_PIX_FMT, "-c:a", "aac", "-b:a",
        "64k", "-f", "mp4",
    ]));
    a.push(out.display().to_string());
    a
}

pub fn make_synthetic_clip(t: &Transcoder, duration_s: u32, out: &Path) -> Result<(), BenchError> {
    t.run("synthetic", &synthetic_clip_args(duration_s, out))
}
