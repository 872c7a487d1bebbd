use super::types::VideoFrame;

/// Frames needed to cover `samples` of audio: ceil(samples * fps / rate).
pub fn frames_for_samples(samples: u64, sample_rate: u32, fps: u32) -> u64 {
    (samples * fps as u64).div_ceil(sample_rate as u64)
}

pub fn frames_for_ms(duration_ms: u64, fps: u32) -> u64 {
    (duration_ms * fps as u64).div_ceil(1000)
}

pub fn pts_for_index(index: u64, fps: u32) -> u64 {
    index * 1000 / fps as u64
}

/// Keeps the video timeline locked to the audio timeline.
///
/// Each pushed batch comes with the number of real audio samples it covers.
/// The pacer emits exactly enough frames to reach
/// `ceil(total_samples * fps / rate)`, dropping surplus frames (from padded
/// chunks) and repeating the batch's last frame if it came up short.
#[derive(Debug, Clone)]
pub struct Pacer {
    fps: u32,
    sample_rate: u32,
    audio_samples: u64,
    frames: u64,
}

impl Pacer {
    pub fn new(fps: u32, sample_rate: u32) -> Self {
        assert!(fps > 0 && sample_rate > 0);
        Self {
            fps,
            sample_rate,
            audio_samples: 0,
            frames: 0,
        }
    }

    pub fn frames_emitted(&self) -> u64 {
        self.frames
    }

    pub fn audio_samples(&self) -> u64 {
        self.audio_samples
    }

    pub fn audio_ms(&self) -> f64 {
        self.audio_samples as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn video_ms(&self) -> f64 {
        self.frames as f64 * 1000.0 / self.fps as f64
    }

    /// Media time of the next frame.
    pub fn next_pts(&self) -> u64 {
        pts_for_index(self.frames, self.fps)
    }

    /// Frames still owed for audio pushed so far plus `content_samples`.
    pub fn frames_needed(&self, content_samples: usize) -> usize {
        let target = frames_for_samples(self.audio_samples + content_samples as u64, self.sample_rate, self.fps);
        (target - self.frames) as usize
    }

    pub fn push(&mut self, content_samples: usize, batch: Vec<VideoFrame>) -> Vec<VideoFrame> {
        let needed = self.frames_needed(content_samples);
        self.audio_samples += content_samples as u64;
        let last = batch.last().cloned();
        let mut out: Vec<VideoFrame> = batch.into_iter().take(needed).collect();
        if let Some(last) = last {
            while out.len() < needed {
                out.push(last.clone());
            }
        }
        for f in &mut out {
            f.pts_ms = pts_for_index(self.frames, self.fps);
            self.frames += 1;
        }
        out
    }
}

/// Stamps a sequence of synthesized batches onto one timeline.
pub fn pace_frames<I>(batches: I, fps: u32, sample_rate: u32) -> Vec<VideoFrame>
where
    I: IntoIterator<Item = (usize, Vec<VideoFrame>)>,
{
    let mut pacer = Pacer::new(fps, sample_rate);
    batches
        .into_iter()
        .flat_map(|(samples, batch)| pacer.push(samples, batch))
        .collect()
}
