//! Driving-video decoding for the mock backend.
//!
//! The mock never links a video decoder. A blob tagged [`RAW_VIDEO_TAG`]
//! carries raw frames (`width u32 BE, height u32 BE, count u32 BE`, then
//! `count` packed RGB24 frames). Any other container is replaced by a
//! procedural 1280x720 clip seeded from the blob's CRC, so identical blobs
//! always give identical frames.

use super::BackendError;
use crate::media::{frame_len, PixelFormat, VideoFrame};

pub const RAW_VIDEO_TAG: [u8; 4] = *b"RAWV";
const PROCEDURAL_FRAMES: u32 = 4;
const PROCEDURAL_WIDTH: u32 = 1280;
const PROCEDURAL_HEIGHT: u32 = 720;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrivingProfile {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Vec<u8>>,
}

impl DrivingProfile {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn from_frames(frames: &[VideoFrame]) -> Self {
        let (width, height) = frames.first().map(|f| (f.width, f.height)).unwrap_or((0, 0));
        Self {
            width,
            height,
            frames: frames.iter().map(|f| f.data.clone()).collect(),
        }
    }

    pub fn frame(&self, index: u64) -> VideoFrame {
        VideoFrame {
            width: self.width,
            height: self.height,
            format: PixelFormat::Rgb24,
            pts_ms: 0,
            data: self.frames[(index % self.frames.len() as u64) as usize].clone(),
        }
    }
}

pub fn encode_raw_video(frames: &[VideoFrame]) -> Vec<u8> {
    let (w, h) = frames.first().map(|f| (f.width, f.height)).unwrap_or((0, 0));
    let mut out = Vec::with_capacity(12 + frames.len() * frame_len(w, h));
    out.extend_from_slice(&w.to_be_bytes());
    out.extend_from_slice(&h.to_be_bytes());
    out.extend_from_slice(&(frames.len() as u32).to_be_bytes());
    for f in frames {
        out.extend_from_slice(&f.data);
    }
    out
}

pub fn decode_driving_video(container_tag: [u8; 4], blob: &[u8]) -> Result<DrivingProfile, BackendError> {
    if container_tag == RAW_VIDEO_TAG {
        decode_raw(blob)
    } else if blob.is_empty() {
        Err(BackendError::EmptyProfile)
    } else {
        Ok(procedural(crc32fast::hash(blob)))
    }
}

fn decode_raw(blob: &[u8]) -> Result<DrivingProfile, BackendError> {
    if blob.len() < 12 {
        return Err(BackendError::BadRequest("raw video header truncated".into()));
    }
    let word = |i: usize| u32::from_be_bytes(blob[i..i + 4].try_into().unwrap());
    let (width, height, count) = (word(0), word(4), word(8));
    if count == 0 {
        return Err(BackendError::EmptyProfile);
    }
    if width == 0 || height == 0 {
        return Err(BackendError::BadRequest("raw video has zero size".into()));
    }
    let each = frame_len(width, height);
    let body = &blob[12..];
    if body.len() != each * count as usize {
        return Err(BackendError::BadRequest(format!(
            "raw video body is {} bytes, expected {}",
            body.len(),
            each * count as usize
        )));
    }
    Ok(DrivingProfile {
        width,
        height,
        frames: body.chunks_exact(each).map(<[u8]>::to_vec).collect(),
    })
}

fn procedural(seed: u32) -> DrivingProfile {
    let (w, h) = (PROCEDURAL_WIDTH, PROCEDURAL_HEIGHT);
    let bg = [(seed & 0x7f) as u8 + 40, ((seed >> 8) & 0x7f) as u8 + 40, ((seed >> 16) & 0x7f) as u8 + 40];
    let skin = [224u8, 172, 105];
    let frames = (0..PROCEDURAL_FRAMES)
        .map(|i| {
            // Head sways a few pixels per frame.
            let cx = (w / 2) as i64 + [0i64, 6, 0, -6][i as usize % 4];
            let cy = (h / 2) as i64;
            let (rx, ry) = (w as i64 / 6, h as i64 / 3);
            let mut data = vec![0u8; frame_len(w, h)];
            for y in 0..h as i64 {
                let shade = (y * 48 / h as i64) as u8;
                for x in 0..w as i64 {
                    let dx = x - cx;
                    let dy = y - cy;
                    let inside = dx * dx * ry * ry + dy * dy * rx * rx <= rx * rx * ry * ry;
                    let px = if inside { skin } else { [bg[0].saturating_add(shade), bg[1], bg[2]] };
                    let o = ((y * w as i64 + x) * 3) as usize;
                    data[o..o + 3].copy_from_slice(&px);
                }
            }
            data
        })
        .collect();
    DrivingProfile {
        width: w,
        height: h,
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip() {
        let frames: Vec<VideoFrame> = (0..3)
            .map(|i| {
                let mut f = VideoFrame::black(4, 2);
                f.data[0] = i;
                f
            })
            .collect();
        let blob = encode_raw_video(&frames);
        let p = decode_driving_video(RAW_VIDEO_TAG, &blob).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.frame(4).data[0], 1);
    }

    #[test]
    fn raw_errors() {
        assert_eq!(
            decode_driving_video(RAW_VIDEO_TAG, &encode_raw_video(&[])),
            Err(BackendError::EmptyProfile)
        );
        let mut blob = encode_raw_video(&[VideoFrame::black(2, 2)]);
        blob.pop();
        assert!(decode_driving_video(RAW_VIDEO_TAG, &blob).is_err());
        assert_eq!(decode_driving_video(*b"MP4 ", &[]), Err(BackendError::EmptyProfile));
    }

    #[test]
    fn procedural_is_deterministic() {
        let a = decode_driving_video(*b"MP4 ", b"some video").unwrap();
        let b = decode_driving_video(*b"MP4 ", b"some video").unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width, a.height, a.len()), (1280, 720, 4));
        let c = decode_driving_video(*b"MP4 ", b"other video").unwrap();
        assert_ne!(a.frames[0], c.frames[0]);
    }
}
