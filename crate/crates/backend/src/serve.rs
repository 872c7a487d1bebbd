use std::io;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use tokio::io::{AsyncBufReadExt, AsyncRead, AsyncWrite, AsyncWriteExt, BufReader, BufWriter};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::task::JoinSet;
use tracing::{debug, info, warn};
use txt2vid_core::synth::protocol::{dispatch, parse_request, BackendRequest, BackendResponse};
use txt2vid_core::synth::SynthesisBackend;

#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Requests running longer than this are answered with a `timeout`
    /// error. The work itself is not cancelled.
    pub request_timeout: Option<Duration>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServeSummary {
    pub requests: u64,
    pub errors: u64,
    /// True when the peer asked for shutdown, false on EOF.
    pub shutdown: bool,
}

pub type SharedBackend<B> = Arc<Mutex<B>>;

/// Serves one connection until `shutdown` or EOF.
///
/// Lines are read by one task. Requests run on the blocking pool and may
/// finish out of order; `register_profile` waits for everything in flight
/// and runs alone, so later requests see the profile. All responses go
/// through a single writer. On `shutdown` the pending responses are flushed
/// before the acknowledgement and the writer is closed.
pub async fn serve_backend<R, W, B>(reader: R, writer: W, backend: SharedBackend<B>, opts: &ServeOptions) -> io::Result<ServeSummary>
where
    R: AsyncRead + Unpin,
    W: AsyncWrite + Unpin + Send + 'static,
    B: SynthesisBackend + 'static,
{
    let (tx, mut rx) = mpsc::channel::<BackendResponse>(64);
    let writer_task = tokio::spawn(async move {
        let mut w = BufWriter::new(writer);
        while let Some(resp) = rx.recv().await {
            w.write_all(resp.to_line().as_bytes()).await?;
            w.flush().await?;
        }
        w.shutdown().await
    });

    let mut reader = BufReader::new(reader);
    let mut inflight = JoinSet::new();
    let mut summary = ServeSummary::default();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf).await? == 0 {
            break;
        }
        let Ok(line) = std::str::from_utf8(&buf) else {
            summary.requests += 1;
            summary.errors += 1;
            send(&tx, BackendResponse::error(0, "parse", "request is not UTF-8")).await;
            continue;
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        summary.requests += 1;
        let request = match parse_request(line) {
            Ok(r) => r,
            Err(resp) => {
                summary.errors += 1;
                send(&tx, resp).await;
                continue;
            }
        };
        debug!(id = request.request_id(), "request");
        match request {
            BackendRequest::Shutdown { request_id } => {
                drain(&mut inflight).await;
                send(&tx, BackendResponse::ok(request_id)).await;
                summary.shutdown = true;
                break;
            }
            BackendRequest::RegisterProfile { .. } => {
                drain(&mut inflight).await;
                let resp = execute(backend.clone(), request, opts.request_timeout).await;
                summary.errors += u64::from(!resp.is_ok());
                send(&tx, resp).await;
            }
            _ => {
                let (backend, tx, timeout) = (backend.clone(), tx.clone(), opts.request_timeout);
                inflight.spawn(async move {
                    let resp = execute(backend, request, timeout).await;
                    let ok = resp.is_ok();
                    send(&tx, resp).await;
                    ok
                });
            }
        }
        while let Some(done) = inflight.try_join_next() {
            summary.errors += u64::from(!done.unwrap_or(false));
        }
    }
    while let Some(done) = inflight.join_next().await {
        summary.errors += u64::from(!done.unwrap_or(false));
    }
    drop(tx);
    writer_task.await.map_err(io::Error::other)??;
    Ok(summary)
}

async fn send(tx: &mpsc::Sender<BackendResponse>, resp: BackendResponse) {
    if tx.send(resp).await.is_err() {
        warn!("response dropped: writer closed");
    }
}

async fn drain(inflight: &mut JoinSet<bool>) {
    while inflight.join_next().await.is_some() {}
}

async fn execute<B>(backend: SharedBackend<B>, request: BackendRequest, timeout: Option<Duration>) -> BackendResponse
where
    B: SynthesisBackend + 'static,
{
    let id = request.request_id();
    let task = tokio::task::spawn_blocking(move || {
        let mut b = backend.lock().unwrap_or_else(|p| p.into_inner());
        dispatch(&mut *b, &request)
    });
    let joined = match timeout {
        Some(t) => match tokio::time::timeout(t, task).await {
            Ok(j) => j,
            Err(_) => {
                return BackendResponse::error(id, "timeout", format!("no result within {} ms", t.as_millis()));
            }
        },
        None => task.await,
    };
    joined.unwrap_or_else(|e| BackendResponse::error(id, "internal", format!("backend task failed: {e}")))
}

/// Accepts connections on `listener`, all sharing `backend`, until one of
/// them ends with a `shutdown` request.
pub async fn serve_tcp<B>(listener: TcpListener, backend: SharedBackend<B>, opts: ServeOptions) -> io::Result<()>
where
    B: SynthesisBackend + 'static,
{
    let (done_tx, mut done_rx) = mpsc::channel::<()>(1);
    loop {
        tokio::select! {
            accepted = listener.accept() => {
                let (stream, peer) = accepted?;
                spawn_connection(stream, peer, backend.clone(), opts.clone(), done_tx.clone());
            }
            _ = done_rx.recv() => return Ok(()),
        }
    }
}

fn spawn_connection<B>(
    stream: tokio::net::TcpStream,
    peer: SocketAddr,
    backend: SharedBackend<B>,
    opts: ServeOptions,
    done: mpsc::Sender<()>,
) where
    B: SynthesisBackend + 'static,
{
    tokio::spawn(async move {
        let (r, w) = stream.into_split();
        match serve_backend(r, w, backend, &opts).await {
            Ok(s) => {
                info!(%peer, requests = s.requests, errors = s.errors, "connection closed");
                if s.shutdown {
                    let _ = done.send(()).await;
                }
            }
            Err(e) => warn!(%peer, "connection failed: {e}"),
        }
    });
}
