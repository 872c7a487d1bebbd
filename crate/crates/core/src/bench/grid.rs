use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Every benchmark encode is normalized to this before downsampling.
pub const TARGET_WIDTH: u32 = 1280;
pub const TARGET_HEIGHT: u32 = 720;
pub const TARGET_FPS: u32 = 25;
pub const TARGET_PIX_FMT: &str = "yuv420p";
pub const TARGET_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VideoCodec {
    H264,
    Av1,
}

impl VideoCodec {
    pub fn as_str(self) -> &'static str {
        match self {
            VideoCodec::H264 => "h264",
            VideoCodec::Av1 => "av1",
        }
    }

    /// ffmpeg encoder name.
    pub fn encoder(self) -> &'static str {
        match self {
            VideoCodec::H264 => "libx264",
            VideoCodec::Av1 => "libaom-av1",
        }
    }
}

impl fmt::Display for VideoCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VideoCodec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "h264" => Ok(VideoCodec::H264),
            "av1" => Ok(VideoCodec::Av1),
            _ => Err(format!("unknown video codec {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioCodec {
    Aac,
}

impl AudioCodec {
    pub fn as_str(self) -> &'static str {
        "aac"
    }
}

impl fmt::Display for AudioCodec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AudioCodec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "aac" => Ok(AudioCodec::Aac),
            _ => Err(format!("unknown audio codec {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodecParams {
    pub video_codec: VideoCodec,
    pub crf: u8,
    pub ds_video: u8,
    pub audio_codec: AudioCodec,
    pub audio_br_kbps: u8,
    pub ds_audio: u8,
}

impl CodecParams {
    pub fn new(video_codec: VideoCodec, crf: u8, ds_video: u8, audio_br_kbps: u8) -> Self {
        Self {
            video_codec,
            crf,
            ds_video,
            audio_codec: AudioCodec::Aac,
            audio_br_kbps,
            ds_audio: 1,
        }
    }

    /// Short file-name-safe tag, e.g. `h264-crf32-ds4-aac5-dsa1`.
    pub fn label(&self) -> String {
        format!(
            "{}-crf{}-ds{}-{}{}-dsa{}",
            self.video_codec, self.crf, self.ds_video, self.audio_codec, self.audio_br_kbps, self.ds_audio
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        if ![1, 2, 4].contains(&self.ds_video) {
            return Err(format!("video downsampling {} not in {{1,2,4}}", self.ds_video));
        }
        if ![1, 2].contains(&self.ds_audio) {
            return Err(format!("audio downsampling {} not in {{1,2}}", self.ds_audio));
        }
        let max_crf = match self.video_codec {
            VideoCodec::H264 => 51,
            VideoCodec::Av1 => 63,
        };
        if self.crf > max_crf {
            return Err(format!("crf {} above {max_crf}", self.crf));
        }
        if self.audio_br_kbps == 0 {
            return Err("audio bitrate must be positive".into());
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        TARGET_WIDTH / self.ds_video as u32
    }

    pub fn height(&self) -> u32 {
        TARGET_HEIGHT / self.ds_video as u32
    }

    pub fn audio_rate(&self) -> u32 {
        TARGET_SAMPLE_RATE / self.ds_audio as u32
    }
}

/// The 14 encodes per content, in table order.
pub fn table1_grid() -> Vec<CodecParams> {
    TABLE1.iter().map(|r| r.0).collect()
}

/// Average combined bitrate (kbps) reported for each grid row across the
/// original contents, in table order.
pub fn table1_avg_kbps() -> Vec<f64> {
    TABLE1.iter().map(|r| r.1).collect()
}

const fn row(video_codec: VideoCodec, crf: u8, ds_video: u8, audio_br_kbps: u8) -> CodecParams {
    CodecParams {
        video_codec,
        crf,
        ds_video,
        audio_codec: AudioCodec::Aac,
        audio_br_kbps,
        ds_audio: 1,
    }
}

use VideoCodec::{Av1, H264};

const TABLE1: [(CodecParams, f64); 14] = [
    (row(H264, 32, 4, 5), 17.5),
    (row(H264, 32, 4, 10), 22.5),
    (row(H264, 30, 2, 5), 55.1),
    (row(H264, 30, 2, 10), 60.1),
    (row(H264, 28, 2, 5), 79.8),
    (row(H264, 28, 2, 10), 84.8),
    (row(H264, 26, 2, 5), 124.1),
    (row(H264, 26, 2, 10), 129.1),
    (row(Av1, 63, 2, 5), 13.8),
    (row(Av1, 63, 2, 10), 18.8),
    (row(Av1, 63, 1, 5), 16.0),
    (row(Av1, 63, 1, 10), 21.0),
    (row(Av1, 60, 2, 5), 20.3),
    (row(Av1, 60, 2, 10), 25.3),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_golden() {
        let g = table1_grid();
        assert_eq!(g.len(), 14);
        assert_eq!(g[0], CodecParams::new(H264, 32, 4, 5));
        assert_eq!(g[13], CodecParams::new(Av1, 60, 2, 10));
        assert_eq!(g.iter().filter(|p| p.video_codec == H264).count(), 8);
        assert!(g.iter().all(|p| p.validate().is_ok() && p.ds_audio == 1));
        assert_eq!(g[0].label(), "h264-crf32-ds4-aac5-dsa1");
        assert_eq!((g[0].width(), g[0].height()), (320, 180));
    }

    #[test]
    fn bad_params() {
        assert!(CodecParams::new(H264, 30, 3, 5).validate().is_err());
        assert!(CodecParams::new(H264, 60, 2, 5).validate().is_err());
        assert!(CodecParams::new(Av1, 60, 2, 5).validate().is_ok());
    }
}
