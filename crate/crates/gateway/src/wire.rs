//! Wire protocol listeners: plain TCP and binary websocket messages.

use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tracing::{debug, info, warn};
use txt2vid_core::wire::{ErrorCode, Frame, FrameDecoder, ProtocolErrorPayload};

use crate::session::{Hub, SessionDriver};

/// Decodes `bytes` and runs every complete frame through the driver.
/// Undecodable input is answered with PROTOCOL_ERROR and ends the
/// connection.
fn feed(decoder: &mut FrameDecoder, driver: &mut SessionDriver, bytes: &[u8]) -> (Vec<Frame>, bool) {
    decoder.extend(bytes);
    let mut replies = Vec::new();
    loop {
        match decoder.next_frame() {
            Ok(Some(frame)) => {
                debug!(msg = %frame.msg_type, len = frame.payload.len(), "frame");
                let out = driver.handle(&frame);
                replies.extend(out.replies);
                if out.close {
                    return (replies, true);
                }
            }
            Ok(None) => return (replies, false),
            Err(e) => {
                warn!(session = driver.session().map(|s| s.id), "undecodable input: {e}");
                replies.push(ProtocolErrorPayload::new(ErrorCode::Malformed, e.to_string()).to_frame());
                return (replies, true);
            }
        }
    }
}

/// Replies are built locally and always fit a frame.
fn encoded(f: &Frame) -> Vec<u8> {
    f.encode().expect("reply fits in a frame")
}

pub async fn serve_tcp(listener: TcpListener, hub: Arc<Hub>) {
    loop {
        match listener.accept().await {
            Ok((stream, peer)) => {
                let hub = hub.clone();
                tokio::spawn(async move {
                    info!(%peer, "wire connection");
                    if let Err(e) = handle_tcp(stream, hub).await {
                        debug!(%peer, "wire connection: {e}");
                    }
                });
            }
            Err(e) => {
                warn!("wire accept: {e}");
                tokio::time::sleep(std::time::Duration::from_millis(50)).await;
            }
        }
    }
}

async fn handle_tcp(mut stream: TcpStream, hub: Arc<Hub>) -> std::io::Result<()> {
    stream.set_nodelay(true)?;
    let mut driver = SessionDriver::wire(hub);
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let n = stream.read(&mut buf).await?;
        if n == 0 {
            if let Err(e) = decoder.finish() {
                debug!("connection closed mid-frame: {e}");
            }
            return Ok(());
        }
        let (replies, close) = feed(&mut decoder, &mut driver, &buf[..n]);
        for f in replies {
            stream.write_all(&encoded(&f)).await?;
        }
        if close {
            stream.shutdown().await?;
            return Ok(());
        }
    }
}

/// Same protocol over websocket binary messages. Frames may span messages.
pub async fn handle_ws(mut socket: WebSocket, hub: Arc<Hub>) {
    let mut driver = SessionDriver::wire(hub);
    let mut decoder = FrameDecoder::new();
    while let Some(msg) = socket.recv().await {
        let bytes = match msg {
            Ok(Message::Binary(b)) => b,
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(Message::Text(_)) => {
                let err = ProtocolErrorPayload::new(ErrorCode::Malformed, "text message on the wire endpoint");
                let _ = socket.send(Message::Binary(encoded(&err.to_frame()).into())).await;
                break;
            }
            Ok(_) => continue,
        };
        let (replies, close) = feed(&mut decoder, &mut driver, &bytes);
        for f in replies {
            if socket.send(Message::Binary(encoded(&f).into())).await.is_err() {
                return;
            }
        }
        if close {
            let _ = socket.send(Message::Close(None)).await;
            break;
        }
    }
}
