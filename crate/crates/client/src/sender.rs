use std::io::{self, Write};
use std::net::{SocketAddr, TcpStream};
use std::time::{Duration, Instant};

use thiserror::Error;
use txt2vid_core::wire::{
    read_frame, Frame, MessageType, ProtocolErrorPayload, ReadFrameError, TextSegmentPayload,
};

#[derive(Debug, Error)]
pub enum SendError {
    #[error("wire connection: {0}")]
    Io(#[from] io::Error),
    #[error("reading reply: {0}")]
    Read(#[from] ReadFrameError),
    #[error("receiver closed the connection while {0} was pending")]
    Closed(MessageType),
    #[error("receiver rejected the session ({:?}): {}", .0.code, .0.message)]
    Rejected(ProtocolErrorPayload),
    #[error("expected {expected}, got {got}")]
    Unexpected { expected: MessageType, got: MessageType },
}

#[derive(Debug, Clone, Default)]
pub struct SendOptions {
    /// Hold each segment back until its capture time, as a live sender would.
    pub realtime: bool,
    pub read_timeout: Option<Duration>,
}

/// Sends a sender trace to a receiver, waiting for HELLO_ACK and
/// PROFILE_ACK where they are due.
pub fn send_session(addr: SocketAddr, trace: &[Frame], opts: &SendOptions) -> Result<(), SendError> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(opts.read_timeout.or(Some(Duration::from_secs(30))))?;
    let start = Instant::now();
    for frame in trace {
        if opts.realtime && frame.msg_type == MessageType::TextSegment {
            if let Ok(seg) = TextSegmentPayload::decode(&frame.payload) {
                let due = Duration::from_millis(seg.capture_ts_ms);
                if let Some(wait) = due.checked_sub(start.elapsed()) {
                    std::thread::sleep(wait);
                }
            }
        }
        let bytes = frame
            .encode()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e.to_string()))?;
        stream.write_all(&bytes)?;
        let expected = match frame.msg_type {
            MessageType::Hello => MessageType::HelloAck,
            MessageType::RegisterProfile => MessageType::ProfileAck,
            _ => continue,
        };
        let reply = read_frame(&mut stream)?.ok_or(SendError::Closed(frame.msg_type))?;
        if reply.msg_type == MessageType::ProtocolError {
            return Err(match ProtocolErrorPayload::decode(&reply.payload) {
                Ok(p) => SendError::Rejected(p),
                Err(_) => SendError::Unexpected {
                    expected,
                    got: reply.msg_type,
                },
            });
        }
        if reply.msg_type != expected {
            return Err(SendError::Unexpected {
                expected,
                got: reply.msg_type,
            });
        }
    }
    stream.flush()?;
    Ok(())
}
