//! Frame codec.
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x54 0x56 ("TV")
//! 2       1     version (1)
//! 3       1     msg_type
//! 4       1     flags (reserved, 0)
//! 5       4     payload_len (u32 BE)
//! 9       n     payload
//! 9+n     4     crc (u32 BE, CRC-32/IEEE over bytes 2..9+n)
//! ```

use thiserror::Error;

use super::MessageType;

pub const MAGIC: [u8; 2] = [0x54, 0x56];
pub const VERSION: u8 = 1;
pub const MAX_PAYLOAD: usize = 64 * 1024 * 1024;
pub const HEADER_LEN: usize = 9;
pub const TRAILER_LEN: usize = 4;
/// Bytes a frame adds around its payload.
pub const FRAME_OVERHEAD: usize = HEADER_LEN + TRAILER_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("crc mismatch: frame says {expected:08x}, computed {actual:08x}")]
    BadCrc { expected: u32, actual: u32 },
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload of {0} bytes exceeds the 64 MiB cap")]
    OversizePayload(usize),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("reserved flags set: 0x{0:02x}")]
    BadFlags(u8),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MessageType, payload: Vec<u8>) -> Self {
        Self { msg_type, payload }
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        encode_frame(self.msg_type, &self.payload)
    }

    /// Size of this frame on the wire.
    pub fn wire_len(&self) -> usize {
        self.payload.len() + FRAME_OVERHEAD
    }
}

pub fn encode_frame(msg_type: MessageType, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(FrameError::OversizePayload(payload.len()));
    }
    let mut out = Vec::with_capacity(payload.len() + FRAME_OVERHEAD);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg_type as u8);
    out.push(0);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    let crc = crc32fast::hash(&out[2..]);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Decodes one frame from the start of `buf`, returning it with the number
/// of bytes consumed.
///
/// `buf` is treated as the whole remaining input: a frame extending past its
/// end is `Truncated`. The CRC is verified before version, type and flags so
/// a corrupted header byte surfaces as `BadCrc`.
pub fn decode_frame(buf: &[u8]) -> Result<(Frame, usize), FrameError> {
    let payload_len = parse_header(buf)?;
    let total = HEADER_LEN + payload_len + TRAILER_LEN;
    if buf.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            available: buf.len(),
        });
    }
    if payload_len > MAX_PAYLOAD {
        return Err(FrameError::OversizePayload(payload_len));
    }
    finish_decode(&buf[..total]).map(|f| (f, total))
}

/// Checks magic and returns the declared payload length.
fn parse_header(buf: &[u8]) -> Result<usize, FrameError> {
    if buf.len() < 2 {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN,
            available: buf.len(),
        });
    }
    if buf[..2] != MAGIC {
        return Err(FrameError::BadMagic([buf[0], buf[1]]));
    }
    if buf.len() < HEADER_LEN {
        return Err(FrameError::Truncated {
            needed: HEADER_LEN,
            available: buf.len(),
        });
    }
    Ok(u32::from_be_bytes([buf[5], buf[6], buf[7], buf[8]]) as usize)
}

fn finish_decode(frame: &[u8]) -> Result<Frame, FrameError> {
    let crc_at = frame.len() - TRAILER_LEN;
    let expected = u32::from_be_bytes(frame[crc_at..].try_into().expect("4 bytes"));
    let actual = crc32fast::hash(&frame[2..crc_at]);
    if expected != actual {
        return Err(FrameError::BadCrc { expected, actual });
    }
    if frame[2] != VERSION {
        return Err(FrameError::BadVersion(frame[2]));
    }
    let msg_type = MessageType::try_from(frame[3]).map_err(|_| FrameError::UnknownType(frame[3]))?;
    if frame[4] != 0 {
        return Err(FrameError::BadFlags(frame[4]));
    }
    Ok(Frame {
        msg_type,
        payload: frame[HEADER_LEN..crc_at].to_vec(),
    })
}

/// Offset of the next candidate magic strictly after position 0, or the
/// position from which a partial magic may still complete.
pub fn resync_offset(buf: &[u8]) -> usize {
    for i in 1..buf.len() {
        if buf[i] == MAGIC[0] && (i + 1 == buf.len() || buf[i + 1] == MAGIC[1]) {
            return i;
        }
    }
    buf.len()
}

/// Incremental decoder for an ordered byte stream.
///
/// Feed bytes with [`FrameDecoder::extend`] and pull frames with
/// [`FrameDecoder::next_frame`]. After an error the offending bytes are
/// skipped up to the next magic, so decoding can resume.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn extend(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// `Ok(None)` means more input is needed.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, FrameError> {
        let payload_len = match parse_header(&self.buf) {
            Ok(len) => len,
            Err(FrameError::Truncated { .. }) => return Ok(None),
            Err(e) => {
                self.skip_to_magic();
                return Err(e);
            }
        };
        if payload_len > MAX_PAYLOAD {
            self.skip_to_magic();
            return Err(FrameError::OversizePayload(payload_len));
        }
        let total = HEADER_LEN + payload_len + TRAILER_LEN;
        if self.buf.len() < total {
            return Ok(None);
        }
        match finish_decode(&self.buf[..total]) {
            Ok(frame) => {
                self.buf.drain(..total);
                Ok(Some(frame))
            }
            Err(e) => {
                self.skip_to_magic();
                Err(e)
            }
        }
    }

    /// Called at end of input: leftover bytes are a truncated frame.
    pub fn finish(&self) -> Result<(), FrameError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(FrameError::Truncated {
                needed: HEADER_LEN.max(self.buf.len() + 1),
                available: self.buf.len(),
            })
        }
    }

    fn skip_to_magic(&mut self) {
        let off = resync_offset(&self.buf);
        self.buf.drain(..off);
    }
}

/// Reads one frame from a blocking reader. `Ok(None)` on clean EOF before
/// the first byte.
pub fn read_frame<R: std::io::Read>(reader: &mut R) -> Result<Option<Frame>, ReadFrameError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        let n = reader.read(&mut header[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(FrameError::Truncated {
                needed: HEADER_LEN,
                available: got,
            }
            .into());
        }
        got += n;
    }
    let payload_len = parse_header(&header)?;
    if payload_len > MAX_PAYLOAD {
        return Err(FrameError::OversizePayload(payload_len).into());
    }
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + payload_len + TRAILER_LEN, 0);
    if let Err(e) = reader.read_exact(&mut frame[HEADER_LEN..]) {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            return Err(FrameError::Truncated {
                needed: frame.len(),
                available: HEADER_LEN,
            }
            .into());
        }
        return Err(e.into());
    }
    Ok(Some(finish_decode(&frame)?))
}

#[derive(Debug, Error)]
pub enum ReadFrameError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
