//! Session wire protocol: frames, message payloads and the session state
//! machine. All integers are big-endian except PCM samples, which keep the
//! little-endian layout used everywhere else for raw audio.

mod frame;
mod message;
mod session;

pub use frame::{
    decode_frame, encode_frame, read_frame, resync_offset, Frame, FrameDecoder, FrameError,
    ReadFrameError, FRAME_OVERHEAD, HEADER_LEN, MAGIC, MAX_PAYLOAD, TRAILER_LEN, VERSION,
};
pub use message::{
    AudioSegmentPayload, ErrorCode, HelloAckPayload, HelloPayload, PayloadError,
    ProfileAckPayload, ProtocolErrorPayload, SessionEndPayload, SessionProfile, TextSegmentPayload,
    FEATURE_AUDIO,
};
pub use session::{Action, AccountingEvent, PeerState, Role, SessionMachine};

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MessageType {
    Hello = 0x01,
    HelloAck = 0x02,
    RegisterProfile = 0x03,
    ProfileAck = 0x04,
    TextSegment = 0x05,
    AudioSegment = 0x06,
    SessionEnd = 0x07,
    ProtocolError = 0x08,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::Hello,
        MessageType::HelloAck,
        MessageType::RegisterProfile,
        MessageType::ProfileAck,
        MessageType::TextSegment,
        MessageType::AudioSegment,
        MessageType::SessionEnd,
        MessageType::ProtocolError,
    ];
}

impl TryFrom<u8> for MessageType {
    type Error = u8;

    fn try_from(v: u8) -> Result<Self, u8> {
        Ok(match v {
            0x01 => MessageType::Hello,
            0x02 => MessageType::HelloAck,
            0x03 => MessageType::RegisterProfile,
            0x04 => MessageType::ProfileAck,
            0x05 => MessageType::TextSegment,
            0x06 => MessageType::AudioSegment,
            0x07 => MessageType::SessionEnd,
            0x08 => MessageType::ProtocolError,
            other => return Err(other),
        })
    }
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            MessageType::Hello => "HELLO",
            MessageType::HelloAck => "HELLO_ACK",
            MessageType::RegisterProfile => "REGISTER_PROFILE",
            MessageType::ProfileAck => "PROFILE_ACK",
            MessageType::TextSegment => "TEXT_SEGMENT",
            MessageType::AudioSegment => "AUDIO_SEGMENT",
            MessageType::SessionEnd => "SESSION_END",
            MessageType::ProtocolError => "PROTOCOL_ERROR",
        };
        f.write_str(name)
    }
}
