use thiserror::Error;

use super::{Frame, MessageType};
use crate::text::{self, CompressorId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("payload truncated reading {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("field {0} is not valid UTF-8")]
    BadUtf8(&'static str),
    #[error("driving video is empty")]
    EmptyVideo,
    #[error("unknown compressor id {0}")]
    UnknownCompressor(u8),
    #[error("text body does not decompress to UTF-8: {0}")]
    BadBody(String),
    #[error("PCM payload has an odd byte count")]
    OddPcm,
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("string field {0} longer than 65535 bytes")]
    StringTooLong(&'static str),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], PayloadError> {
        if self.buf.len() - self.pos < n {
            return Err(PayloadError::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, PayloadError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, PayloadError> {
        Ok(u16::from_be_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, PayloadError> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, PayloadError> {
        Ok(u64::from_be_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string16(&mut self, what: &'static str) -> Result<String, PayloadError> {
        let len = self.u16(what)? as usize;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| PayloadError::BadUtf8(what))
    }

    fn rest(&mut self) -> &'a [u8] {
        let s = &self.buf[self.pos..];
        self.pos = self.buf.len();
        s
    }

    fn done(&self) -> Result<(), PayloadError> {
        match self.buf.len() - self.pos {
            0 => Ok(()),
            n => Err(PayloadError::TrailingBytes(n)),
        }
    }
}

fn put_string16(out: &mut Vec<u8>, s: &str, what: &'static str) -> Result<(), PayloadError> {
    let len = u16::try_from(s.len()).map_err(|_| PayloadError::StringTooLong(what))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

/// HELLO feature bit: sender may send AUDIO_SEGMENT messages.
pub const FEATURE_AUDIO: u16 = 0x0001;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloPayload {
    pub session_id: u32,
    pub features: u16,
}

impl HelloPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.session_id.to_be_bytes().to_vec();
        out.extend_from_slice(&self.features.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let p = Self {
            session_id: r.u32("session_id")?,
            features: r.u16("features")?,
        };
        r.done()?;
        Ok(p)
    }

    pub fn into_frame(self) -> Frame {
        Frame::new(MessageType::Hello, self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelloAckPayload {
    pub session_id: u32,
}

impl HelloAckPayload {
    pub fn encode(&self) -> Vec<u8> {
        self.session_id.to_be_bytes().to_vec()
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let p = Self {
            session_id: r.u32("session_id")?,
        };
        r.done()?;
        Ok(p)
    }
}

/// Driving video and voice reference bound to a user id. Sent once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionProfile {
    pub user_id: u16,
    pub voice_profile_ref: String,
    /// Container format of `driving_video`, e.g. `*b"MP4 "`.
    pub container_tag: [u8; 4],
    pub driving_video: Vec<u8>,
}

impl SessionProfile {
    pub fn encode(&self) -> Result<Vec<u8>, PayloadError> {
        if self.driving_video.is_empty() {
            return Err(PayloadError::EmptyVideo);
        }
        let mut out = Vec::with_capacity(self.driving_video.len() + self.voice_profile_ref.len() + 12);
        out.extend_from_slice(&self.user_id.to_be_bytes());
        put_string16(&mut out, &self.voice_profile_ref, "voice_profile_ref")?;
        out.extend_from_slice(&self.container_tag);
        out.extend_from_slice(&(self.driving_video.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.driving_video);
        Ok(out)
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let user_id = r.u16("user_id")?;
        let voice_profile_ref = r.string16("voice_profile_ref")?;
        let container_tag: [u8; 4] = r.take(4, "container_tag")?.try_into().unwrap();
        let len = r.u32("driving_video_len")? as usize;
        let driving_video = r.take(len, "driving_video")?.to_vec();
        r.done()?;
        if driving_video.is_empty() {
            return Err(PayloadError::EmptyVideo);
        }
        Ok(Self {
            user_id,
            voice_profile_ref,
            container_tag,
            driving_video,
        })
    }

    pub fn container_tag_str(&self) -> String {
        String::from_utf8_lossy(&self.container_tag).into_owned()
    }

    pub fn to_frame(&self) -> Result<Frame, PayloadError> {
        Ok(Frame::new(MessageType::RegisterProfile, self.encode()?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileAckPayload {
    pub user_id: u16,
    pub replaced: bool,
}

impl ProfileAckPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.user_id.to_be_bytes().to_vec();
        out.push(self.replaced as u8);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let p = Self {
            user_id: r.u16("user_id")?,
            replaced: r.u8("replaced")? != 0,
        };
        r.done()?;
        Ok(p)
    }
}

/// Compressed transcript fragment, the steady-state payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextSegmentPayload {
    pub session_id: u32,
    pub seq: u32,
    /// Sender clock, ms since session start, at which this segment's speech begins.
    pub capture_ts_ms: u64,
    pub user_id: u16,
    pub compressor: CompressorId,
    pub body: Vec<u8>,
}

impl TextSegmentPayload {
    /// Compresses `text` into a new segment payload.
    pub fn from_text(
        session_id: u32,
        seq: u32,
        capture_ts_ms: u64,
        user_id: u16,
        compressor: CompressorId,
        text: &str,
    ) -> Self {
        Self {
            session_id,
            seq,
            capture_ts_ms,
            user_id,
            compressor,
            body: text::compress_text(text, compressor),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(19 + self.body.len());
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.capture_ts_ms.to_be_bytes());
        out.extend_from_slice(&self.user_id.to_be_bytes());
        out.push(self.compressor as u8);
        out.extend_from_slice(&self.body);
        out
    }

    /// Parses the layout only; the body is not decompressed.
    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let session_id = r.u32("session_id")?;
        let seq = r.u32("seq")?;
        let capture_ts_ms = r.u64("capture_ts_ms")?;
        let user_id = r.u16("user_id")?;
        let raw = r.u8("compressor_id")?;
        let compressor = CompressorId::try_from(raw).map_err(|_| PayloadError::UnknownCompressor(raw))?;
        Ok(Self {
            session_id,
            seq,
            capture_ts_ms,
            user_id,
            compressor,
            body: r.rest().to_vec(),
        })
    }

    pub fn text(&self) -> Result<String, PayloadError> {
        text::decompress_text(&self.body, self.compressor).map_err(|e| PayloadError::BadBody(e.to_string()))
    }

    pub fn to_frame(&self) -> Frame {
        Frame::new(MessageType::TextSegment, self.encode())
    }
}

/// Audio passthrough segment: PCM instead of text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioSegmentPayload {
    pub session_id: u32,
    pub seq: u32,
    pub capture_ts_ms: u64,
    pub user_id: u16,
    pub sample_rate: u32,
    /// Mono i16, serialized little-endian.
    pub samples: Vec<i16>,
}

impl AudioSegmentPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + self.samples.len() * 2);
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.capture_ts_ms.to_be_bytes());
        out.extend_from_slice(&self.user_id.to_be_bytes());
        out.extend_from_slice(&self.sample_rate.to_be_bytes());
        for s in &self.samples {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let session_id = r.u32("session_id")?;
        let seq = r.u32("seq")?;
        let capture_ts_ms = r.u64("capture_ts_ms")?;
        let user_id = r.u16("user_id")?;
        let sample_rate = r.u32("sample_rate")?;
        if sample_rate == 0 {
            return Err(PayloadError::ZeroSampleRate);
        }
        let pcm = r.rest();
        if !pcm.len().is_multiple_of(2) {
            return Err(PayloadError::OddPcm);
        }
        Ok(Self {
            session_id,
            seq,
            capture_ts_ms,
            user_id,
            sample_rate,
            samples: pcm.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect(),
        })
    }

    pub fn duration_ms(&self) -> u64 {
        self.samples.len() as u64 * 1000 / self.sample_rate as u64
    }

    pub fn to_frame(&self) -> Frame {
        Frame::new(MessageType::AudioSegment, self.encode())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEndPayload {
    pub session_id: u32,
    /// Sender clock at the end of the last segment's speech.
    pub end_ts_ms: u64,
}

impl SessionEndPayload {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.session_id.to_be_bytes().to_vec();
        out.extend_from_slice(&self.end_ts_ms.to_be_bytes());
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let p = Self {
            session_id: r.u32("session_id")?,
            end_ts_ms: r.u64("end_ts_ms")?,
        };
        r.done()?;
        Ok(p)
    }

    pub fn into_frame(self) -> Frame {
        Frame::new(MessageType::SessionEnd, self.encode())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    Malformed = 1,
    IllegalState = 2,
    UnknownProfile = 3,
    SessionMismatch = 4,
    Internal = 5,
}

impl ErrorCode {
    fn from_u16(v: u16) -> Self {
        match v {
            1 => ErrorCode::Malformed,
            2 => ErrorCode::IllegalState,
            3 => ErrorCode::UnknownProfile,
            4 => ErrorCode::SessionMismatch,
            _ => ErrorCode::Internal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolErrorPayload {
    pub code: ErrorCode,
    pub message: String,
}

impl ProtocolErrorPayload {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = (self.code as u16).to_be_bytes().to_vec();
        let mut msg = self.message.as_str();
        while msg.len() > u16::MAX as usize {
            let mut cut = u16::MAX as usize;
            while !msg.is_char_boundary(cut) {
                cut -= 1;
            }
            msg = &msg[..cut];
        }
        put_string16(&mut out, msg, "message").expect("length clamped");
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Self, PayloadError> {
        let mut r = Reader::new(buf);
        let code = ErrorCode::from_u16(r.u16("code")?);
        let message = r.string16("message")?;
        r.done()?;
        Ok(Self { code, message })
    }

    pub fn to_frame(&self) -> Frame {
        Frame::new(MessageType::ProtocolError, self.encode())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_layout() {
        let p = SessionProfile {
            user_id: 0x0102,
            voice_profile_ref: "v1".into(),
            container_tag: *b"MP4 ",
            driving_video: vec![9, 9, 9],
        };
        let bytes = p.encode().unwrap();
        assert_eq!(bytes, vec![1, 2, 0, 2, b'v', b'1', b'M', b'P', b'4', b' ', 0, 0, 0, 3, 9, 9, 9]);
        assert_eq!(SessionProfile::decode(&bytes).unwrap(), p);
    }

    #[test]
    fn empty_driving_video_rejected() {
        let p = SessionProfile {
            user_id: 1,
            voice_profile_ref: String::new(),
            container_tag: *b"MP4 ",
            driving_video: vec![],
        };
        assert_eq!(p.encode(), Err(PayloadError::EmptyVideo));
        let raw = [0, 1, 0, 0, b'M', b'P', b'4', b' ', 0, 0, 0, 0];
        assert_eq!(SessionProfile::decode(&raw), Err(PayloadError::EmptyVideo));
    }

    #[test]
    fn text_segment_layout() {
        let seg = TextSegmentPayload::from_text(7, 3, 1500, 42, CompressorId::Identity, "hi");
        let bytes = seg.encode();
        assert_eq!(bytes.len(), 19 + 2);
        assert_eq!(&bytes[..4], &7u32.to_be_bytes());
        assert_eq!(&bytes[4..8], &3u32.to_be_bytes());
        assert_eq!(&bytes[8..16], &1500u64.to_be_bytes());
        assert_eq!(&bytes[16..18], &42u16.to_be_bytes());
        assert_eq!(bytes[18], 0);
        let back = TextSegmentPayload::decode(&bytes).unwrap();
        assert_eq!(back.text().unwrap(), "hi");
    }

    #[test]
    fn audio_segment_is_le_pcm() {
        let seg = AudioSegmentPayload {
            session_id: 1,
            seq: 0,
            capture_ts_ms: 0,
            user_id: 1,
            sample_rate: 16000,
            samples: vec![1, -2],
        };
        let bytes = seg.encode();
        assert_eq!(&bytes[22..], &[1, 0, 0xfe, 0xff]);
        assert_eq!(AudioSegmentPayload::decode(&bytes).unwrap(), seg);
        assert_eq!(AudioSegmentPayload::decode(&bytes[..25]), Err(PayloadError::OddPcm));
    }

    #[test]
    fn truncated_payloads() {
        assert!(HelloPayload::decode(&[0, 0, 0]).is_err());
        assert!(SessionEndPayload::decode(&[0; 11]).is_err());
        assert_eq!(SessionEndPayload::decode(&[0; 13]), Err(PayloadError::TrailingBytes(1)));
        assert!(TextSegmentPayload::decode(&[0; 18]).is_err());
        assert_eq!(
            TextSegmentPayload::decode(&[0; 19].iter().copied().chain([9]).collect::<Vec<_>>()[1..]),
            Err(PayloadError::UnknownCompressor(9))
        );
    }
}
